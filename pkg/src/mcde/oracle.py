"""Brute-force ground truth on enumerable toy distributions.

Provides exact conditionals of a dense discrete joint, total variation
distance, the piecewise-constant histogram density on [0, 1], and a
quadrature check that the TV between a Lipschitz density and its histogram
approximation stays below K / (2L) when the bin masses are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .discretize import BinGrid
from .errors import (
    LengthMismatch,
    QuadratureFailure,
    TvBoundExceeded,
    ZeroMassCondition,
)

_QUAD_TOL = 1e-7


@dataclass(frozen=True)
class DiscreteJoint:
    """Dense probability table over p finite columns with 1-based levels."""

    probs: np.ndarray  # shape = tuple of per-column level counts

    def __post_init__(self):
        p = self.probs
        if p.ndim < 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be a nonnegative table summing to 1")
        p.flags.writeable = False

    @property
    def p(self) -> int:
        return self.probs.ndim

    @property
    def levels(self) -> tuple[int, ...]:
        return self.probs.shape

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n rows of 1-based level indices drawn from the joint."""
        flat = self.probs.ravel()
        draws = rng.choice(flat.size, size=n, p=flat)
        return np.stack(np.unravel_index(draws, self.probs.shape), axis=1) + 1


def exact_conditional(
    joint: DiscreteJoint, target: int, condition: dict[int, int]
) -> np.ndarray:
    """P(target | condition) with unassigned non-target columns marginalized out."""
    if target in condition:
        raise ValueError("condition must not assign the target column")
    sl = [slice(None)] * joint.p
    for col, level in condition.items():
        if not 1 <= level <= joint.levels[col]:
            raise ZeroMassCondition(f"level {level} outside column {col}'s range")
        sl[col] = level - 1
    sub = joint.probs[tuple(sl)]
    keep_axis = sum(1 for c in range(target) if c not in condition)
    other_axes = tuple(a for a in range(sub.ndim) if a != keep_axis)
    vec = sub.sum(axis=other_axes)
    total = vec.sum()
    if total <= 0.0:
        raise ZeroMassCondition(f"conditioning event {condition} has zero mass")
    return vec / total


def tv(pvec: np.ndarray, qvec: np.ndarray) -> float:
    """Total variation distance (1/2) * sum |p - q|."""
    pvec = np.asarray(pvec, dtype=np.float64)
    qvec = np.asarray(qvec, dtype=np.float64)
    if pvec.shape != qvec.shape:
        raise LengthMismatch(f"{pvec.shape} vs {qvec.shape}")
    return float(0.5 * np.sum(np.abs(pvec - qvec)))


def histogram_estimate(pi_vec: np.ndarray, grid: BinGrid, u: float) -> float:
    """Piecewise-constant density pi_l / (b_l - b_{l-1}) at the bin containing u."""
    pi_vec = np.asarray(pi_vec, dtype=np.float64)
    if pi_vec.size != grid.L:
        raise LengthMismatch(f"need {grid.L} bin masses, got {pi_vec.size}")
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    l = int(np.searchsorted(grid.cuts[:-1], u, side="right"))
    return float(pi_vec[l - 1] / (grid.cuts[l] - grid.cuts[l - 1]))


def _quad(f: Callable[[float], float], lo: float, hi: float) -> float:
    val, err = quad(f, lo, hi, limit=400)
    if err > max(_QUAD_TOL, 1e-8 * abs(val)):
        raise QuadratureFailure(f"quadrature error {err:.3g} on [{lo}, {hi}]")
    return val


def bin_masses(density: Callable[[float], float], grid: BinGrid) -> np.ndarray:
    """Exact integral of `density` over each bin (the zero-bias oracle masses)."""
    return np.array([
        _quad(density, float(grid.cuts[l]), float(grid.cuts[l + 1]))
        for l in range(grid.L)
    ])


def check_histogram_tv_bound(
    density: Callable[[float], float],
    lipschitz_k: float,
    grid: BinGrid,
    oracle_pi: np.ndarray,
) -> tuple[float, float]:
    """Measure TV(density, histogram(oracle_pi)) by quadrature and compare with
    the Lipschitz bound K / (2L); raises if the bound is violated."""
    oracle_pi = np.asarray(oracle_pi, dtype=np.float64)
    if oracle_pi.size != grid.L:
        raise LengthMismatch(f"need {grid.L} bin masses, got {oracle_pi.size}")
    total = 0.0
    for l in range(grid.L):
        lo, hi = float(grid.cuts[l]), float(grid.cuts[l + 1])
        height = oracle_pi[l] / (hi - lo)
        total += _quad(lambda u: abs(density(u) - height), lo, hi)
    measured = 0.5 * total
    bound = lipschitz_k / (2.0 * grid.L)
    if measured > bound + 1e-7:
        raise TvBoundExceeded(f"measured TV {measured:.6g} exceeds bound {bound:.6g}")
    return float(measured), float(bound)


def cross_entropy_gap(pi_star: np.ndarray, pi_model: np.ndarray) -> float:
    """KL(pi_star || pi_model): the excess classification loss over the entropy
    floor, used as an observable surrogate for model bias on oracle data."""
    pi_star = np.asarray(pi_star, dtype=np.float64)
    pi_model = np.asarray(pi_model, dtype=np.float64)
    if pi_star.shape != pi_model.shape:
        raise LengthMismatch(f"{pi_star.shape} vs {pi_model.shape}")
    mask = pi_star > 0
    return float(np.sum(pi_star[mask] * (np.log(pi_star[mask]) - np.log(pi_model[mask]))))
