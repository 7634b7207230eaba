"""Bin grid over [0, 1] and the cell-to-label map.

Labels are 1-based bin indices for continuous columns (via the ECDF) and the
level index for categorical columns; 0 is reserved for masked/missing cells.
Bins are closed on the left and open on the right, except that the last bin
includes 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cdf import EmpiricalCdf, eval_cdf
from .dataset import ColumnKind, ColumnSpec, Table
from .errors import ConfigError, DataError, IndexOutOfRange


@dataclass(frozen=True)
class BinGrid:
    """Cut-points 0 = b_0 < b_1 < ... < b_L = 1."""

    cuts: np.ndarray

    def __post_init__(self):
        cuts = self.cuts
        if cuts.ndim != 1 or cuts.size < 3:
            raise ConfigError("grid needs at least 2 bins")
        if cuts[0] != 0.0 or cuts[-1] != 1.0 or np.any(np.diff(cuts) <= 0):
            raise ConfigError("cuts must increase strictly from 0 to 1")
        cuts.flags.writeable = False

    @property
    def L(self) -> int:
        return self.cuts.size - 1


def uniform_grid(L: int) -> BinGrid:
    """Equal-width grid with cut-points s/L."""
    if L < 2:
        raise ConfigError("bin count must be >= 2")
    return BinGrid(np.arange(L + 1, dtype=np.float64) / L)


def bin_interval(grid: BinGrid, l: int) -> tuple[float, float]:
    """Endpoints (b_{l-1}, b_l) of bin l."""
    if not 1 <= l <= grid.L:
        raise IndexOutOfRange(f"bin index {l} outside [1, {grid.L}]")
    return float(grid.cuts[l - 1]), float(grid.cuts[l])


def labels_from_quantiles(q: np.ndarray, grid: BinGrid) -> np.ndarray:
    """Bin index sum_{s=0}^{L-1} 1(b_s <= q), in [1, L] for q in (0, 1]."""
    return np.searchsorted(grid.cuts[:-1], q, side="right").astype(np.int64)


def discretize(table: Table, cdfs: dict[int, EmpiricalCdf], grid: BinGrid) -> np.ndarray:
    """n x p label matrix: bin/level index for observed cells, 0 for missing."""
    out = np.zeros((table.n, table.p), dtype=np.int64)
    for j, col in enumerate(table.schema):
        obs = table.observed[:, j]
        if col.kind is ColumnKind.CONTINUOUS:
            if j not in cdfs:
                raise DataError(f"no fitted CDF for continuous column {col.name!r}")
            q = eval_cdf(cdfs[j], table.values[obs, j])
            out[obs, j] = labels_from_quantiles(np.atleast_1d(q), grid)
        else:
            out[obs, j] = table.values[obs, j].astype(np.int64)
    return out


def column_level_counts(schema: list[ColumnSpec], n_bins: int) -> list[int]:
    """Per-column label vocabulary size (bin count or level count), excluding 0."""
    return [n_bins if c.kind is ColumnKind.CONTINUOUS else c.num_levels for c in schema]


def fit_column_cdfs(table: Table) -> dict[int, EmpiricalCdf]:
    """Fit an ECDF on the observed cells of every continuous column."""
    from .cdf import fit_ecdf

    return {
        j: fit_ecdf(table.values[:, j], table.observed[:, j])
        for j, c in enumerate(table.schema)
        if c.kind is ColumnKind.CONTINUOUS
    }
