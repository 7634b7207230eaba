"""Training-mask sampling and the four missingness-mechanism corruptors.

The training mask draws a shared inclusion probability u ~ Uniform(0, 1) per
row and then Bernoulli(u) bits per column, which puts positive probability on
every observed/masked pattern. The corruptors (MCAR, MAR, MNAR-logistic,
MNAR-quantile) turn a fully observed table into one with missing cells while
leaving observed values bit-identical.
"""

from __future__ import annotations

import numpy as np

from .dataset import Table
from .errors import ConfigError, DataError, InfeasibleRate, LineSearchFailed


def sample_mask(p: int, rng: np.random.Generator) -> np.ndarray:
    """One mask vector: u ~ U(0,1), then m_j ~ Bernoulli(u); 1 = unmasked."""
    if p < 1:
        raise ConfigError("p must be >= 1")
    u = rng.random()
    return (rng.random(p) < u).astype(np.int8)


def sample_masks(n: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """n independent mask vectors drawn as in `sample_mask` (vectorized)."""
    if p < 1 or n < 1:
        raise ConfigError("n and p must be >= 1")
    u = rng.random((n, 1))
    return (rng.random((n, p)) < u).astype(np.int8)


def _require_complete(table: Table) -> None:
    if not table.fully_observed():
        raise DataError("corruptor input must be fully observed")


def corrupt_mcar(table: Table, rate: float, rng: np.random.Generator) -> Table:
    """Drop each cell independently with probability `rate`."""
    _require_complete(table)
    if not 0.0 <= rate < 1.0:
        raise ConfigError("rate must lie in [0, 1)")
    drop = rng.random((table.n, table.p)) < rate
    return Table(table.schema, table.values, ~drop)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def _standardized(values: np.ndarray) -> np.ndarray:
    mu = values.mean(axis=0)
    sd = values.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    return (values - mu) / sd


def _fit_bias(scores: np.ndarray, rate: float) -> float:
    """Bisect the intercept so the mean drop probability matches `rate` within 1e-3."""
    lo, hi = -60.0, 60.0
    f_lo = _sigmoid(scores + lo).mean()
    f_hi = _sigmoid(scores + hi).mean()
    if f_lo > rate or f_hi < rate:
        raise LineSearchFailed(
            f"cannot bracket target rate {rate} (range [{f_lo:.3g}, {f_hi:.3g}])"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = _sigmoid(scores + mid).mean()
        if abs(f_mid - rate) <= 1e-3:
            return mid
        if f_mid < rate:
            lo = mid
        else:
            hi = mid
    raise LineSearchFailed("bisection did not converge")


def _mar_drop(
    table: Table,
    rate: float,
    n_anchor: int,
    rng: np.random.Generator,
    weights: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Shared MAR machinery: returns (drop matrix over all cells, anchor column indices)."""
    _require_complete(table)
    if not 0.0 < rate < 1.0:
        raise ConfigError("rate must lie in (0, 1)")
    if not 1 <= n_anchor < table.p:
        raise ConfigError("need 1 <= n_anchor < p")
    anchors = np.sort(rng.choice(table.p, size=n_anchor, replace=False))
    others = np.setdiff1d(np.arange(table.p), anchors)
    x = _standardized(table.values[:, anchors])
    if weights is None:
        weights = rng.standard_normal((n_anchor, others.size))
    elif weights.shape != (n_anchor, others.size):
        raise ConfigError(f"weights must have shape {(n_anchor, others.size)}")
    scores = x @ weights
    bias = _fit_bias(scores, rate)
    probs = _sigmoid(scores + bias)
    drop = np.zeros((table.n, table.p), dtype=bool)
    drop[:, others] = rng.random((table.n, others.size)) < probs
    return drop, anchors


def corrupt_mar(
    table: Table,
    rate: float,
    n_anchor: int,
    rng: np.random.Generator,
    *,
    weights: np.ndarray | None = None,
) -> Table:
    """Missing-at-random: anchor columns stay complete, the rest follow a
    logistic model on the standardized anchors with an intercept fitted by
    bisection to hit the target rate.

    `weights` is a test hook overriding the random logistic weights.
    """
    drop, _ = _mar_drop(table, rate, n_anchor, rng, weights)
    return Table(table.schema, table.values, ~drop)


def corrupt_mnar_logistic(
    table: Table,
    rate: float,
    n_anchor: int,
    rng: np.random.Generator,
    *,
    weights: np.ndarray | None = None,
) -> Table:
    """MAR pass, then the anchors themselves are corrupted MCAR at the same rate,
    so the logistic inputs end up partially unobserved."""
    drop, anchors = _mar_drop(table, rate, n_anchor, rng, weights)
    drop[:, anchors] = rng.random((table.n, anchors.size)) < rate
    return Table(table.schema, table.values, ~drop)


def corrupt_mnar_quantile(
    table: Table,
    rate: float,
    quantile: float,
    subset_fraction: float,
    rng: np.random.Generator,
) -> Table:
    """Mask only tail cells (below the `quantile`-th or above the (1-quantile)-th
    empirical percentile) of a random column subset, with a Bernoulli probability
    calibrated so the overall missing fraction approaches `rate`."""
    _require_complete(table)
    if not 0.0 < quantile < 0.5:
        raise ConfigError("quantile must lie in (0, 0.5)")
    if not 0.0 < subset_fraction <= 1.0:
        raise ConfigError("subset_fraction must lie in (0, 1]")
    if rate < 0.0:
        raise ConfigError("rate must be >= 0")
    if rate == 0.0:
        return Table(table.schema, table.values, table.observed)
    if rate > 2.0 * quantile * subset_fraction:
        raise InfeasibleRate(
            f"rate {rate} exceeds tail capacity 2*{quantile}*{subset_fraction}"
        )
    k = max(1, int(round(subset_fraction * table.p)))
    cols = np.sort(rng.choice(table.p, size=k, replace=False))
    bern = min(1.0, rate * table.p / (2.0 * quantile * k))
    drop = np.zeros((table.n, table.p), dtype=bool)
    for j in cols:
        v = table.values[:, j]
        lo = np.quantile(v, quantile)
        hi = np.quantile(v, 1.0 - quantile)
        tail = (v < lo) | (v > hi)
        drop[:, j] = tail & (rng.random(table.n) < bern)
    return Table(table.schema, table.values, ~drop)
