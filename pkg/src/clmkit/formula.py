"""Model formula mini-language and design matrix construction.

Grammar (whitespace-insensitive)::

    formula := NAME '~' sum
    sum     := product ('+' product)*
    product := inter ('*' inter)*
    inter   := atom (':' atom)*
    atom    := NAME | '(' '1' '|' NAME ')'

``a*b`` expands to ``a + b + a:b``. Random terms ``(1 | g)`` may only appear
as a whole summand.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .data import DataTable, listwise_complete, require_rows
from .errors import FormulaError, IdentifiabilityError, RankDeficiencyError, SchemaError

_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z_.][A-Za-z0-9_.]*)|(?P<one>1(?![0-9]))|(?P<op>[~+:*()|]))")


@dataclass(frozen=True)
class FormulaAst:
    response: str
    fixed_terms: tuple[tuple[str, ...], ...]
    random_terms: tuple[str, ...] = ()

    @property
    def variables(self) -> list[str]:
        seen = []
        for term in self.fixed_terms:
            for v in term:
                if v not in seen:
                    seen.append(v)
        return seen

    def __str__(self) -> str:
        parts = [":".join(t) for t in self.fixed_terms]
        parts += [f"(1 | {g})" for g in self.random_terms]
        return f"{self.response} ~ {' + '.join(parts) if parts else '1'}"


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise FormulaError(f"unexpected character {text[start]!r}", _byte_offset(text, start))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), _byte_offset(text, start)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(text, len(text))))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None, value=None):
        tok = self.tokens[self.i]
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            want = value or kind
            got = tok[1] or "end of formula"
            raise FormulaError(f"expected {want!r}, found {got!r}", tok[2])
        self.i += 1
        return tok

    def parse(self) -> FormulaAst:
        response = self.take("name")[1]
        self.take("op", "~")
        fixed: list[tuple[str, ...]] = []
        random: list[str] = []
        self.sum(fixed, random)
        tok = self.peek()
        if tok[0] != "end":
            raise FormulaError(f"unexpected {tok[1]!r}", tok[2])
        for term in fixed:
            if response in term:
                raise FormulaError(f"response {response!r} appears on the right-hand side")
        if response in random:
            raise FormulaError(f"response {response!r} used as a grouping factor")
        return FormulaAst(response, _order_terms(fixed), tuple(dict.fromkeys(random)))

    def sum(self, fixed, random):
        self.summand(fixed, random)
        while self.peek()[1] == "+":
            self.take()
            self.summand(fixed, random)

    def summand(self, fixed, random):
        tok = self.peek()
        if tok[1] == "(":
            random.append(self.random_term())
            if self.peek()[1] in (":", "*"):
                t = self.peek()
                raise FormulaError("random terms cannot be combined with ':' or '*'", t[2])
            return
        if tok[0] == "one":
            self.take()
            return
        fixed.extend(self.product())

    def random_term(self) -> str:
        self.take("op", "(")
        tok = self.peek()
        if tok[0] != "one":
            raise FormulaError("only random intercepts '(1 | group)' are supported", tok[2])
        self.take()
        self.take("op", "|")
        tok = self.peek()
        if tok[1] == "(":
            raise FormulaError("nested random terms are not supported", tok[2])
        group = self.take("name")[1]
        tok = self.peek()
        if tok[1] in (":", "*", "|", "+"):
            raise FormulaError("nested random terms are not supported", tok[2])
        self.take("op", ")")
        return group

    def product(self) -> list[tuple[str, ...]]:
        factors = [self.inter()]
        while self.peek()[1] == "*":
            self.take()
            factors.append(self.inter())
        out = []
        for r in range(1, len(factors) + 1):
            for combo in itertools.combinations(factors, r):
                merged: list[str] = []
                for part in combo:
                    for v in part:
                        if v not in merged:
                            merged.append(v)
                out.append(tuple(merged))
        return out

    def inter(self) -> tuple[str, ...]:
        names = [self.atom()]
        while self.peek()[1] == ":":
            self.take()
            names.append(self.atom())
        return tuple(dict.fromkeys(names))

    def atom(self) -> str:
        tok = self.peek()
        if tok[1] == "(":
            raise FormulaError("random terms cannot be combined with ':' or '*'", tok[2])
        return self.take("name")[1]


def _order_terms(terms: Iterable[tuple[str, ...]]) -> tuple[tuple[str, ...], ...]:
    # collapse duplicates (a:b == b:a), then order by degree keeping first appearance
    seen: dict[frozenset, tuple[str, ...]] = {}
    for t in terms:
        seen.setdefault(frozenset(t), t)
    unique = list(seen.values())
    return tuple(sorted(unique, key=lambda t: len(t)))


def parse_formula(text: str) -> FormulaAst:
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# design matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VariableCoding:
    """How one covariate enters the design: numeric, or treatment-coded levels."""

    name: str
    kind: str
    levels: tuple[str, ...] = ()
    reference: str | None = None
    mean: float = 0.0
    lo: float = -float("inf")
    hi: float = float("inf")

    @property
    def contrasts(self) -> tuple[str, ...]:
        return tuple(lvl for lvl in self.levels if lvl != self.reference)

    def encode(self, values) -> tuple[list[str], np.ndarray]:
        """Return column names and the (n, k) block for raw values.

        Categorical values may be level labels or integer codes already.
        """
        if self.kind == "numeric":
            return [self.name], np.asarray(values, dtype=float).reshape(-1, 1)
        vals = list(values)
        lookup = {lvl: i for i, lvl in enumerate(self.levels)}
        codes = []
        for v in vals:
            if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
                codes.append(int(v))
            elif str(v) in lookup:
                codes.append(lookup[str(v)])
            else:
                raise SchemaError(f"{self.name}: level {v!r} was not seen when fitting")
        codes = np.asarray(codes, dtype=int)
        names, cols = [], []
        for lvl in self.contrasts:
            names.append(f"{self.name}{lvl}")
            cols.append((codes == lookup[lvl]).astype(float))
        block = np.column_stack(cols) if cols else np.zeros((len(codes), 0))
        return names, block


def _term_block(term: Sequence[str], codings: Mapping[str, VariableCoding], data: Mapping) -> tuple[list[str], np.ndarray]:
    names, block = codings[term[0]].encode(data[term[0]])
    for v in term[1:]:
        n2, b2 = codings[v].encode(data[v])
        # first variable varies fastest
        names = [f"{a}:{b}" for b in n2 for a in names]
        block = np.column_stack([block[:, i] * b2[:, j] for j in range(b2.shape[1]) for i in range(block.shape[1])]) if block.shape[1] and b2.shape[1] else np.zeros((block.shape[0], 0))
    return names, block


@dataclass(frozen=True)
class DesignEncoder:
    """Everything needed to rebuild design rows for new covariate values."""

    fixed_terms: tuple[tuple[str, ...], ...]
    nominal: tuple[str, ...]
    scale: tuple[str, ...]
    codings: Mapping[str, VariableCoding]

    @property
    def variables(self) -> list[str]:
        seen = []
        for t in self.fixed_terms:
            seen.extend(v for v in t if v not in seen)
        seen.extend(v for v in self.nominal + self.scale if v not in seen)
        return seen

    def _blocks(self, terms, data):
        names, blocks = [], []
        n = None
        for term in terms:
            nm, b = _term_block(term, self.codings, data)
            names += nm
            blocks.append(b)
            n = b.shape[0]
        if n is None:
            n = len(next(iter(data.values()))) if data else 0
        return names, (np.column_stack(blocks) if blocks else np.zeros((n, 0)))

    def encode(self, data: Mapping[str, Sequence]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Map raw covariate values (labels or numbers) to (X, W, Z)."""
        missing = [v for v in self.variables if v not in data]
        if missing:
            raise SchemaError(f"missing covariate values for {missing}")
        _, X = self._blocks(self.fixed_terms, data)
        _, W = self._blocks([(v,) for v in self.nominal], data)
        _, Z = self._blocks([(v,) for v in self.scale], data)
        n = max(X.shape[0], W.shape[0], Z.shape[0])
        return X.reshape(n, -1), W.reshape(n, -1), Z.reshape(n, -1)

    def names(self) -> tuple[list[str], list[str], list[str]]:
        dummy = {}
        for v, c in self.codings.items():
            dummy[v] = [0.0] if c.kind == "numeric" else [c.levels[0]] if c.levels else []
        x, _ = self._blocks(self.fixed_terms, dummy)
        w, _ = self._blocks([(v,) for v in self.nominal], dummy)
        z, _ = self._blocks([(v,) for v in self.scale], dummy)
        return x, w, z

    def to_dict(self) -> dict:
        return {
            "fixed_terms": [list(t) for t in self.fixed_terms],
            "nominal": list(self.nominal),
            "scale": list(self.scale),
            "codings": {
                k: {"kind": c.kind, "levels": list(c.levels), "reference": c.reference,
                    "mean": c.mean, "min": c.lo, "max": c.hi}
                for k, c in self.codings.items()
            },
        }

    @classmethod
    def from_dict(cls, d) -> "DesignEncoder":
        codings = {
            k: VariableCoding(k, c["kind"], tuple(c["levels"]), c["reference"], c["mean"],
                              c.get("min", -float("inf")), c.get("max", float("inf")))
            for k, c in d["codings"].items()
        }
        return cls(tuple(tuple(t) for t in d["fixed_terms"]), tuple(d["nominal"]), tuple(d["scale"]), codings)


@dataclass(frozen=True)
class DesignMatrices:
    X: np.ndarray
    W: np.ndarray
    Z: np.ndarray
    response_idx: np.ndarray
    L: int
    x_names: tuple[str, ...] = ()
    w_names: tuple[str, ...] = ()
    z_names: tuple[str, ...] = ()
    group_index: np.ndarray | None = None
    group_labels: tuple[str, ...] = ()
    response_labels: tuple[str, ...] = ()
    encoder: DesignEncoder | None = None
    n_dropped: int = 0
    formula: str = ""

    @property
    def n(self) -> int:
        return int(self.response_idx.shape[0])

    @property
    def n_groups(self) -> int:
        return len(self.group_labels)


def _check_rank(blocks: Sequence[tuple[str, np.ndarray]], tol: float = 1e-10) -> None:
    """Raise on aliased columns.

    A column of ones stands in for the thresholds, which absorb any constant
    shift of the predictor; columns aliased with it are not estimable either.
    Tolerance applies to the diagonal of the pivoted factor of X'X.
    """
    names = ["(thresholds)"]
    cols = []
    n = None
    for nm, b in blocks:
        names += list(nm)
        cols.append(b)
        n = b.shape[0]
    if n is None or sum(b.shape[1] for b in cols) == 0:
        return
    A = np.column_stack([np.ones(n)] + cols)
    for j in range(1, A.shape[1]):
        col = A[:, j]
        if np.all(col == col[0]):
            raise RankDeficiencyError(
                f"column {names[j]!r} is constant and cannot be estimated alongside the thresholds"
            )
    scale = np.sqrt((A * A).sum(axis=0))
    scale[scale == 0] = 1.0
    R, piv = scipy.linalg.qr(A / scale, mode="r", pivoting=True)
    d = np.abs(np.diag(R)) ** 2
    rank = int(np.sum(d > tol * d[0])) if d.size else 0
    if rank < A.shape[1]:
        aliased = [names[piv[k]] for k in range(rank, A.shape[1])]
        raise RankDeficiencyError(f"design is rank deficient; aliased column(s): {', '.join(aliased)}")


def build_design(
    ast: FormulaAst | str,
    table: DataTable,
    nominal: Sequence[str] = (),
    scale: Sequence[str] = (),
) -> DesignMatrices:
    if isinstance(ast, str):
        ast = parse_formula(ast)
    nominal, scale = tuple(nominal), tuple(scale)
    fixed_vars = ast.variables
    clash = [v for v in nominal if v in fixed_vars]
    if clash:
        raise IdentifiabilityError(
            f"{clash}: parameters included in nominal effects cannot be included as covariates"
        )
    used = [ast.response] + fixed_vars + [v for v in nominal + scale if v not in fixed_vars] + list(ast.random_terms)
    for v in used:
        if v not in table:
            raise SchemaError(f"unknown variable {v!r}")
    resp = table[ast.response]
    if resp.kind != "ordinal":
        raise SchemaError(f"response {ast.response!r} must be an ordinal column")
    for v in fixed_vars + list(nominal) + list(scale):
        if table[v].kind not in ("numeric", "categorical"):
            raise SchemaError(f"covariate {v!r} must be numeric or categorical, not {table[v].kind}")
    complete, dropped = listwise_complete(table, dict.fromkeys(used))
    require_rows(complete)

    codings = {}
    for v in dict.fromkeys(fixed_vars + list(nominal) + list(scale)):
        col = complete[v]
        if col.kind == "numeric":
            codings[v] = VariableCoding(v, "numeric", mean=float(np.mean(col.values)),
                                        lo=float(np.min(col.values)), hi=float(np.max(col.values)))
        else:
            codings[v] = VariableCoding(v, "categorical", col.levels, col.reference)
    encoder = DesignEncoder(ast.fixed_terms, nominal, scale, codings)
    raw = {v: complete[v].values for v in codings}
    x_blocks = [_term_block(t, codings, raw) for t in ast.fixed_terms]
    w_blocks = [_term_block((v,), codings, raw) for v in nominal]
    z_blocks = [_term_block((v,), codings, raw) for v in scale]
    _check_rank(x_blocks + w_blocks)
    _check_rank(z_blocks)

    def stack(blocks):
        names = [n for nm, _ in blocks for n in nm]
        mats = [b for _, b in blocks]
        return names, (np.column_stack(mats) if mats else np.zeros((complete.n_rows, 0)))

    xn, X = stack(x_blocks)
    wn, W = stack(w_blocks)
    zn, Z = stack(z_blocks)
    group_index, group_labels = None, ()
    if ast.random_terms:
        if len(ast.random_terms) > 1:
            raise FormulaError("only a single random intercept is supported")
        g = complete[ast.random_terms[0]]
        if g.kind == "numeric":
            labels = [repr(float(x)) for x in g.values]
        else:
            labels = [g.levels[int(c)] for c in g.values]
        uniq = list(dict.fromkeys(labels))
        pos = {u: i for i, u in enumerate(uniq)}
        group_index = np.array([pos[x] for x in labels], dtype=np.int64)
        group_labels = tuple(uniq)
    return DesignMatrices(
        X=X, W=W, Z=Z,
        response_idx=complete[ast.response].values.astype(np.int64) + 1,
        L=len(resp.levels),
        x_names=tuple(xn), w_names=tuple(wn), z_names=tuple(zn),
        group_index=group_index, group_labels=group_labels,
        response_labels=tuple(resp.levels),
        encoder=encoder, n_dropped=dropped, formula=str(ast),
    )


def design_from_arrays(
    X,
    y,
    L: int | None = None,
    W=None,
    Z=None,
    groups=None,
    x_names: Sequence[str] | None = None,
) -> DesignMatrices:
    """Wrap raw arrays (response coded 1..L) as a design, for simulation and tests."""
    y = np.asarray(y, dtype=np.int64)
    n = y.shape[0]
    def as_matrix(a):
        if a is None:
            return np.zeros((n, 0))
        a = np.asarray(a, dtype=float)
        return a.reshape(n, -1) if a.ndim != 2 else a

    X, W, Z = as_matrix(X), as_matrix(W), as_matrix(Z)
    L = int(L if L is not None else y.max())
    xn = tuple(x_names) if x_names is not None else tuple(f"x{j + 1}" for j in range(X.shape[1]))
    gi, gl = None, ()
    if groups is not None:
        labels = [str(g) for g in groups]
        uniq = list(dict.fromkeys(labels))
        pos = {u: i for i, u in enumerate(uniq)}
        gi = np.array([pos[g] for g in labels], dtype=np.int64)
        gl = tuple(uniq)
    codings = {
        name: VariableCoding(name, "numeric", mean=float(X[:, j].mean()), lo=float(X[:, j].min()), hi=float(X[:, j].max()))
        if n else VariableCoding(name, "numeric")
        for j, name in enumerate(xn)
    }
    encoder = DesignEncoder(tuple((name,) for name in xn), (), (), codings) if W.shape[1] == 0 and Z.shape[1] == 0 else None
    return DesignMatrices(
        X=X, W=W, Z=Z, response_idx=y, L=L,
        x_names=xn,
        w_names=tuple(f"w{j + 1}" for j in range(W.shape[1])),
        z_names=tuple(f"z{j + 1}" for j in range(Z.shape[1])),
        group_index=gi, group_labels=gl,
        response_labels=tuple(str(i) for i in range(1, L + 1)),
        encoder=encoder,
    )
