"""Per-column empirical CDF and its piecewise-linear inverse.

The forward transform is the exact step ECDF (so bin indices match counting
ranks), while inversion interpolates linearly through the quantile nodes
(0, x_(1)), (c_1/m, x_(1)), ..., (c_K/m, x_(K)) so sampling stays continuous
and inside the observed range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateColumn


@dataclass(frozen=True)
class EmpiricalCdf:
    """Distinct sorted observed values with cumulative counts (counts[-1] = m)."""

    nodes: np.ndarray  # float64, strictly increasing
    counts: np.ndarray  # int64, strictly increasing, counts[-1] = sample size

    def __post_init__(self):
        self.nodes.flags.writeable = False
        self.counts.flags.writeable = False

    @property
    def m(self) -> int:
        return int(self.counts[-1])


def fit_ecdf(values: np.ndarray, observed: np.ndarray | None = None) -> EmpiricalCdf:
    """Fit a step ECDF on the observed entries of `values`."""
    values = np.asarray(values, dtype=np.float64)
    if observed is not None:
        values = values[np.asarray(observed, dtype=bool)]
    nodes, node_counts = np.unique(values, return_counts=True)
    if nodes.size < 2:
        raise DegenerateColumn(
            f"need >= 2 distinct observed values to fit an ECDF, found {nodes.size}"
        )
    return EmpiricalCdf(nodes, np.cumsum(node_counts, dtype=np.int64))


def eval_cdf(cdf: EmpiricalCdf, x) -> np.ndarray | float:
    """Right-continuous step value F(x) = #{observed <= x} / m."""
    x = np.asarray(x, dtype=np.float64)
    idx = np.searchsorted(cdf.nodes, x, side="right")
    out = np.where(idx == 0, 0.0, cdf.counts[np.maximum(idx, 1) - 1] / cdf.m)
    return float(out) if out.ndim == 0 else out


def inv_cdf(cdf: EmpiricalCdf, u) -> np.ndarray | float:
    """Piecewise-linear inverse; exact at every quantile node, range [min, max]."""
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ValueError("quantile levels must lie in [0, 1]")
    qs = np.concatenate(([0.0], cdf.counts / cdf.m))
    xs = np.concatenate(([cdf.nodes[0]], cdf.nodes))
    scalar = u.ndim == 0
    uu = np.atleast_1d(u)
    j = np.searchsorted(qs, uu, side="left")
    out = np.empty_like(uu)
    hit = qs[j] == uu
    out[hit] = xs[j[hit]]
    rest = ~hit
    if rest.any():
        jr = j[rest]
        frac = (uu[rest] - qs[jr - 1]) / (qs[jr] - qs[jr - 1])
        out[rest] = xs[jr - 1] + frac * (xs[jr] - xs[jr - 1])
    return float(out[0]) if scalar else out
