"""Typed tabular data with explicit missingness and listwise deletion."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CsvParseError, NoDataError, SchemaError

KINDS = ("numeric", "categorical", "ordinal", "group")


@dataclass(frozen=True)
class OrdinalScale:
    """Ordered response levels, in declared order (never sorted)."""

    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        if len(self.labels) < 2:
            raise SchemaError("an ordinal scale needs at least 2 levels")
        if len(set(self.labels)) != len(self.labels):
            raise SchemaError(f"duplicate ordinal levels in {self.labels}")

    @property
    def L(self) -> int:
        return len(self.labels)

    def cut_labels(self) -> list[str]:
        return [f"{a}|{b}" for a, b in zip(self.labels[:-1], self.labels[1:])]


@dataclass(frozen=True)
class ColumnSchema:
    """Declared column type.

    ``levels`` is required for ordinal columns and optional for categorical
    and group columns (inferred in order of first appearance otherwise).
    ``reference`` defaults to the first level.
    """

    name: str
    kind: str
    levels: tuple[str, ...] | None = None
    reference: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.levels is not None:
            object.__setattr__(self, "levels", tuple(str(x) for x in self.levels))
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"column {self.name!r}: duplicate levels")
        if self.kind == "ordinal":
            if self.levels is None:
                raise SchemaError(f"ordinal column {self.name!r} must declare its levels")
            OrdinalScale(self.levels)
        if self.reference is not None and self.levels is not None and self.reference not in self.levels:
            raise SchemaError(f"column {self.name!r}: reference {self.reference!r} is not a level")

    @property
    def scale(self) -> OrdinalScale | None:
        return OrdinalScale(self.levels) if self.kind == "ordinal" else None

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.levels is not None:
            d["levels"] = list(self.levels)
        if self.reference is not None:
            d["reference"] = self.reference
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ColumnSchema":
        unknown = set(d) - {"name", "kind", "levels", "reference"}
        if unknown:
            raise SchemaError(f"unknown schema keys {sorted(unknown)}")
        levels = d.get("levels")
        return cls(d["name"], d["kind"], tuple(levels) if levels is not None else None, d.get("reference"))


@dataclass(frozen=True)
class Column:
    """One typed column.

    Numeric columns store floats; coded columns (categorical, ordinal,
    group) store integer codes into ``levels``. Missing cells are flagged in
    ``missing`` and the corresponding entry of ``values`` is meaningless.
    """

    schema: ColumnSchema
    values: np.ndarray
    missing: np.ndarray
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        self.values.setflags(write=False)
        self.missing.setflags(write=False)

    @property
    def name(self) -> str:
        return self.schema.name

    @property
    def kind(self) -> str:
        return self.schema.kind

    @property
    def reference(self) -> str | None:
        if self.kind == "numeric":
            return None
        return self.schema.reference or (self.levels[0] if self.levels else None)

    def labels(self) -> list[str | None]:
        """Cell values as strings (``None`` for missing)."""
        out = []
        for v, m in zip(self.values, self.missing):
            if m:
                out.append(None)
            elif self.kind == "numeric":
                out.append(repr(float(v)))
            else:
                out.append(self.levels[int(v)])
        return out

    def take(self, idx: np.ndarray) -> "Column":
        return Column(self.schema, self.values[idx].copy(), self.missing[idx].copy(), self.levels)


@dataclass(frozen=True)
class DataTable:
    columns: tuple[Column, ...]
    n_rows: int

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names")
        for c in self.columns:
            if len(c.values) != self.n_rows or len(c.missing) != self.n_rows:
                raise SchemaError(f"column {c.name!r} has the wrong length")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def schema(self) -> list[ColumnSchema]:
        return [c.schema for c in self.columns]

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def __getitem__(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(f"unknown variable {name!r}")

    def row_mask(self, vars: Iterable[str]) -> np.ndarray:
        """True for rows that are complete on every variable in ``vars``."""
        mask = np.ones(self.n_rows, dtype=bool)
        for v in vars:
            mask &= ~self[v].missing
        return mask

    def take(self, idx) -> "DataTable":
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return DataTable(tuple(c.take(idx) for c in self.columns), int(len(idx)))

    def with_column(self, column: Column) -> "DataTable":
        cols = [c for c in self.columns if c.name != column.name] + [column]
        return DataTable(tuple(cols), self.n_rows)


def _coded_column(schema: ColumnSchema, cells: Sequence[str | None], where: str = "") -> Column:
    missing = np.array([c is None for c in cells], dtype=bool)
    if schema.levels is not None:
        levels = list(schema.levels)
    else:
        levels = []
        for c in cells:
            if c is not None and c not in levels:
                levels.append(c)
    lookup = {lvl: i for i, lvl in enumerate(levels)}
    codes = np.zeros(len(cells), dtype=np.int64)
    for i, c in enumerate(cells):
        if c is None:
            continue
        try:
            codes[i] = lookup[c]
        except KeyError:
            raise SchemaError(
                f"row {i + 1}{where}, column {schema.name!r}: {c!r} is not a declared level "
                f"(levels: {levels})"
            ) from None
    if schema.reference is not None and schema.reference not in lookup:
        raise SchemaError(f"column {schema.name!r}: reference {schema.reference!r} is not a level")
    return Column(schema, codes, missing, tuple(levels))


def _numeric_column(schema: ColumnSchema, cells: Sequence[str | None]) -> Column:
    missing = np.array([c is None for c in cells], dtype=bool)
    values = np.zeros(len(cells), dtype=float)
    for i, c in enumerate(cells):
        if c is None:
            continue
        try:
            values[i] = float(c)
        except ValueError:
            raise SchemaError(f"row {i + 1}, column {schema.name!r}: {c!r} is not numeric") from None
    return Column(schema, values, missing)


def make_column(schema: ColumnSchema, cells: Sequence) -> Column:
    """Build a column from raw cells; ``None`` or ``""`` marks a missing cell."""
    cells = [None if (c is None or c == "") else c for c in cells]
    if schema.kind == "numeric":
        return _numeric_column(schema, [None if c is None else str(c) for c in cells])
    return _coded_column(schema, [None if c is None else str(c) for c in cells])


def table_from_columns(schema: Sequence[ColumnSchema], data: Mapping[str, Sequence]) -> DataTable:
    """Build a table from a mapping of column name to raw cells."""
    cols = tuple(make_column(s, data[s.name]) for s in schema)
    n = len(cols[0].values) if cols else 0
    return DataTable(cols, n)


def load_schema(path) -> list[ColumnSchema]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise SchemaError("schema file must hold a JSON list of column descriptions")
    return [ColumnSchema.from_dict(d) for d in raw]


def dump_schema(schema: Sequence[ColumnSchema], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([s.to_dict() for s in schema], fh, indent=2)


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=",", quotechar='"')
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: empty file, expected a header row") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvParseError(
                    f"{path}: line {lineno} has {len(row)} fields, header has {len(header)}"
                )
            rows.append(row)
    return header, rows


def load_csv(path, schema: Sequence[ColumnSchema]) -> DataTable:
    """Read a comma-separated UTF-8 file whose header matches ``schema``.

    Columns present in the file but absent from the schema are an error;
    empty cells become missing markers.
    """
    header, rows = _read_rows(path)
    names = [s.name for s in schema]
    if sorted(header) != sorted(names):
        raise SchemaError(f"{path}: header {header} does not match schema columns {names}")
    pos = {h: i for i, h in enumerate(header)}
    cols = []
    for s in schema:
        cells = [r[pos[s.name]] for r in rows]
        cells = [None if c == "" else c for c in cells]
        if s.kind == "numeric":
            cols.append(_numeric_column(s, cells))
        else:
            cols.append(_coded_column(s, cells))
    return DataTable(tuple(cols), len(rows))


def infer_schema(
    path,
    ordinal: Mapping[str, Sequence[str]] | None = None,
    categorical: Iterable[str] = (),
    group: Iterable[str] = (),
) -> list[ColumnSchema]:
    """Guess column kinds: numeric if every non-empty cell parses as a float.

    ``ordinal`` maps response columns to their level order; ``categorical``
    and ``group`` force those kinds regardless of content.
    """
    ordinal = dict(ordinal or {})
    categorical, group = set(categorical), set(group)
    header, rows = _read_rows(path)
    for name in list(ordinal) + list(categorical) + list(group):
        if name not in header:
            raise SchemaError(f"override names unknown column {name!r}")
    out = []
    for j, name in enumerate(header):
        if name in ordinal:
            out.append(ColumnSchema(name, "ordinal", tuple(ordinal[name])))
        elif name in group:
            out.append(ColumnSchema(name, "group"))
        elif name in categorical:
            out.append(ColumnSchema(name, "categorical"))
        else:
            cells = [r[j] for r in rows if r[j] != ""]
            try:
                [float(c) for c in cells]
                out.append(ColumnSchema(name, "numeric"))
            except ValueError:
                out.append(ColumnSchema(name, "categorical"))
    return out


def write_csv(table: DataTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=",", quotechar='"', lineterminator="\n")
        w.writerow(table.names)
        cols = [c.labels() for c in table.columns]
        for i in range(table.n_rows):
            w.writerow(["" if col[i] is None else col[i] for col in cols])


def listwise_complete(table: DataTable, vars: Iterable[str]) -> tuple[DataTable, int]:
    """Drop rows that are missing any of ``vars``; return the table and the drop count."""
    vars = list(vars)
    for v in vars:
        table[v]
    mask = table.row_mask(vars)
    dropped = int(table.n_rows - mask.sum())
    if dropped == 0:
        return table, 0
    return table.take(mask), dropped


def require_rows(table: DataTable) -> None:
    if table.n_rows == 0:
        raise NoDataError("no data: every row was removed by listwise deletion")
