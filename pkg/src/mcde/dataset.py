"""Mixed-type tables: schema, CSV ingestion with missing cells, splitting.

A `Table` stores continuous cells as floats and categorical cells as 1-based
level indices, together with the binary missing-indicator matrix `observed`
(1 = observed, 0 = missing). Missing cells hold NaN so that accidental reads
fail loudly downstream.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    HeaderMismatch,
    ParseError,
    UnknownCategory,
)
from .rng import substream

MISSING_TOKENS = ("", "NA")


class ColumnKind(enum.Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class ColumnSpec:
    """One column: name, kind, and (for categorical columns) its level strings."""

    name: str
    kind: ColumnKind
    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind is ColumnKind.CATEGORICAL:
            if self.levels is None or len(self.levels) < 2:
                raise ConfigError(f"categorical column {self.name!r} needs >= 2 levels")
            if len(set(self.levels)) != len(self.levels):
                raise ConfigError(f"duplicate levels in column {self.name!r}")
        elif self.levels is not None:
            raise ConfigError(f"continuous column {self.name!r} must not declare levels")

    @property
    def num_levels(self) -> int:
        if self.levels is None:
            raise ConfigError(f"column {self.name!r} is continuous; level count comes from the bin grid")
        return len(self.levels)


def _check_schema(schema: list[ColumnSpec]) -> None:
    if not schema:
        raise ConfigError("schema has no columns")
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate column names in schema")


class Table:
    """Immutable n x p grid of values plus the missing-indicator matrix.

    Invariants: observed categorical cells lie in [1, num_levels]; observed
    continuous cells are finite; missing cells are NaN and must not be read.
    """

    __slots__ = ("schema", "values", "observed")

    def __init__(self, schema: list[ColumnSpec], values: np.ndarray, observed: np.ndarray):
        _check_schema(schema)
        values = np.array(values, dtype=np.float64)
        observed = np.array(observed, dtype=bool)
        if values.ndim != 2 or observed.shape != values.shape:
            raise DataError("values and observed must be matching 2-d arrays")
        if values.shape[1] != len(schema):
            raise DataError(
                f"table has {values.shape[1]} columns but schema has {len(schema)}"
            )
        values = np.where(observed, values, np.nan)
        for j, col in enumerate(schema):
            cells = values[observed[:, j], j]
            if not np.isfinite(cells).all():
                raise DataError(f"non-finite observed cell in column {col.name!r}")
            if col.kind is ColumnKind.CATEGORICAL and cells.size:
                if not np.array_equal(cells, np.round(cells)) or cells.min() < 1 or cells.max() > col.num_levels:
                    raise DataError(
                        f"categorical column {col.name!r} has level outside [1, {col.num_levels}]"
                    )
        values.flags.writeable = False
        observed.flags.writeable = False
        self.schema = list(schema)
        self.values = values
        self.observed = observed

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column_observed(self, j: int) -> np.ndarray:
        """Observed values of column j (1-d, in row order)."""
        return self.values[self.observed[:, j], j]

    def fully_observed(self) -> bool:
        return bool(self.observed.all())

    def subset(self, rows: np.ndarray) -> "Table":
        return Table(self.schema, self.values[rows], self.observed[rows])


def load_schema(path: str) -> list[ColumnSpec]:
    """Read the JSON schema sidecar: {"columns": [{name, kind, levels?}, ...]}."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict) or set(raw) != {"columns"}:
        raise ConfigError(f"schema sidecar {path!r} must be an object with a single 'columns' key")
    cols = []
    for entry in raw["columns"]:
        extra = set(entry) - {"name", "kind", "levels"}
        if extra:
            raise ConfigError(f"unknown schema keys {sorted(extra)} in {path!r}")
        try:
            kind = ColumnKind(entry["kind"])
        except (KeyError, ValueError):
            raise ConfigError(f"column {entry.get('name')!r}: kind must be 'continuous' or 'categorical'")
        levels = tuple(entry["levels"]) if "levels" in entry and entry["levels"] is not None else None
        cols.append(ColumnSpec(entry["name"], kind, levels))
    _check_schema(cols)
    return cols


def schema_to_json(schema: list[ColumnSpec]) -> dict:
    return {
        "columns": [
            {"name": c.name, "kind": c.kind.value}
            | ({"levels": list(c.levels)} if c.levels is not None else {})
            for c in schema
        ]
    }


def schema_from_json(raw: dict) -> list[ColumnSpec]:
    cols = [
        ColumnSpec(
            e["name"],
            ColumnKind(e["kind"]),
            tuple(e["levels"]) if e.get("levels") is not None else None,
        )
        for e in raw["columns"]
    ]
    _check_schema(cols)
    return cols


def load_csv(path: str, schema: list[ColumnSpec]) -> Table:
    """Parse an RFC-4180 CSV against an explicit schema.

    Empty cells and the literal token "NA" become missing; anything else must
    parse per the column kind (float, or a declared categorical level).
    """
    _check_schema(schema)
    names = [c.name for c in schema]
    level_maps = {
        j: {lvl: i + 1 for i, lvl in enumerate(c.levels)}
        for j, c in enumerate(schema)
        if c.kind is ColumnKind.CATEGORICAL
    }
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise HeaderMismatch(f"{path!r} is empty; expected header {names}")
        if header != names:
            raise HeaderMismatch(f"header {header} does not match schema columns {names}")
        values, observed = [], []
        for i, row in enumerate(reader, start=1):
            if len(row) != len(schema):
                raise ParseError(f"expected {len(schema)} cells, found {len(row)}", row=i)
            vrow, orow = [], []
            for j, cell in enumerate(row):
                if cell in MISSING_TOKENS:
                    vrow.append(np.nan)
                    orow.append(False)
                    continue
                if schema[j].kind is ColumnKind.CONTINUOUS:
                    try:
                        x = float(cell)
                    except ValueError:
                        raise ParseError(f"cannot parse {cell!r} as a real", row=i, column=names[j])
                    if not np.isfinite(x):
                        raise ParseError(f"non-finite value {cell!r}", row=i, column=names[j])
                    vrow.append(x)
                else:
                    level = level_maps[j].get(cell)
                    if level is None:
                        raise UnknownCategory(
                            f"value {cell!r} at row {i} is not a declared level of column {names[j]!r}"
                        )
                    vrow.append(float(level))
                orow.append(True)
            values.append(vrow)
            observed.append(orow)
    if not values:
        raise DataError(f"{path!r} has a header but no data rows")
    return Table(schema, np.array(values), np.array(observed))


def write_csv(table: Table, path: str) -> None:
    """Write a table as CSV; missing cells become empty strings."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in table.schema])
        for i in range(table.n):
            row = []
            for j, col in enumerate(table.schema):
                if not table.observed[i, j]:
                    row.append("")
                elif col.kind is ColumnKind.CONTINUOUS:
                    row.append(repr(float(table.values[i, j])))
                else:
                    row.append(col.levels[int(table.values[i, j]) - 1])
            writer.writerow(row)


def split(table: Table, train_fraction: float, seed: int) -> tuple[Table, Table]:
    """Seeded shuffle + prefix split; relative row order is preserved in each part."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie in (0, 1)")
    if table.n < 2:
        raise DataError("need at least 2 rows to split")
    k = int(round(train_fraction * table.n))
    perm = substream(seed, "split").permutation(table.n)
    train_rows = np.sort(perm[:k])
    test_rows = np.sort(perm[k:])
    return table.subset(train_rows), table.subset(test_rows)
