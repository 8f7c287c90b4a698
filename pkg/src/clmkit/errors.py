"""Exception and warning types shared across the package."""


class ClmError(Exception):
    """Base class for all errors raised by clmkit."""


class SchemaError(ClmError):
    """A cell or header does not conform to the declared column schema."""


class CsvParseError(ClmError):
    """Malformed CSV input (row length mismatch and similar)."""


class NoDataError(ClmError):
    """Nothing left to fit after listwise deletion."""


class FormulaError(ClmError):
    """Syntax or semantic error in a model formula.

    ``offset`` is the byte offset into the formula text where the problem
    was detected, or ``None`` when the error is not positional.
    """

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class IdentifiabilityError(ClmError):
    pass


class RankDeficiencyError(ClmError):
    pass


class SingularHessianError(ClmError):
    pass


class ConvergenceError(ClmError):
    """Raised when an operation requires a converged fit and did not get one."""


class NestingError(ClmError):
    pass


class DataMismatchError(ClmError):
    pass


class DomainError(ClmError, ValueError):
    pass


class ClmWarning(UserWarning):
    pass


class ConditionWarning(ClmWarning):
    """Hessian condition number above the ill-definedness threshold."""


class BoundaryWarning(ClmWarning):
    pass


class SparseCellWarning(ClmWarning):
    pass


class ExtrapolationWarning(ClmWarning):
    pass


class SeparationWarning(ClmWarning):
    """Estimates drift to infinity: the gradient vanishes but the Newton step does not."""
