"""Desk-scale evaluation: marginal/joint fidelity, a distance-based privacy
score, and k-NN utility proxies.

Conventions shared by the joint metrics: continuous features are standardized
by the real table's statistics, categorical features are one-hot encoded, and
subsampling uses a fixed seed so every metric is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ColumnKind, Table
from .errors import DataError, EmptyTrain, NoContinuousColumns
from .rng import substream

_EPS = 1e-6


@dataclass
class MetricsReport:
    """Each field is None when inapplicable to the schema or inputs."""

    kl: float | None = None
    gof_ks: float | None = None
    gof_chi2: float | None = None
    mmd: float | None = None
    wd: float | None = None
    dcr: float | None = None
    smape: float | None = None
    f1_macro: float | None = None

    def to_json(self) -> dict:
        out = {}
        for key in ("kl", "gof_ks", "gof_chi2", "mmd", "wd", "dcr", "smape", "f1_macro"):
            val = getattr(self, key)
            if val is not None:
                out[key] = float(val)
        return out


def _check_same_schema(real: Table, synth: Table) -> None:
    if [ (c.name, c.kind, c.levels) for c in real.schema ] != [
        (c.name, c.kind, c.levels) for c in synth.schema
    ]:
        raise DataError("tables must share a schema")


def _smoothed(counts: np.ndarray) -> np.ndarray:
    q = counts.astype(np.float64)
    q = q / max(q.sum(), 1.0)
    q = q + _EPS
    return q / q.sum()


def kl_marginal(real: Table, synth: Table, bins: int = 10) -> float:
    """Mean over columns of KL(real || synth) between per-column histograms."""
    _check_same_schema(real, synth)
    vals = []
    for j, col in enumerate(real.schema):
        a = real.column_observed(j)
        b = synth.column_observed(j)
        if col.kind is ColumnKind.CONTINUOUS:
            lo = min(a.min(), b.min())
            hi = max(a.max(), b.max())
            if hi == lo:
                hi = lo + 1.0
            pa, _ = np.histogram(a, bins=bins, range=(lo, hi))
            pb, _ = np.histogram(b, bins=bins, range=(lo, hi))
        else:
            levels = np.arange(1, col.num_levels + 1)
            pa = np.array([(a == l).sum() for l in levels])
            pb = np.array([(b == l).sum() for l in levels])
        p, q = _smoothed(pa), _smoothed(pb)
        vals.append(float(np.sum(p * np.log(p / q))))
    return float(np.mean(vals))


def _ks_statistic(a: np.ndarray, b: np.ndarray) -> float:
    grid = np.concatenate([a, b])
    fa = np.searchsorted(np.sort(a), grid, side="right") / a.size
    fb = np.searchsorted(np.sort(b), grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def gof(real: Table, synth: Table) -> tuple[float | None, float | None]:
    """(mean KS statistic over continuous columns, mean chi-squared over
    categorical columns); either is None when no such column exists."""
    _check_same_schema(real, synth)
    ks_vals, chi_vals = [], []
    for j, col in enumerate(real.schema):
        a = real.column_observed(j)
        b = synth.column_observed(j)
        if col.kind is ColumnKind.CONTINUOUS:
            ks_vals.append(_ks_statistic(a, b))
        else:
            levels = np.arange(1, col.num_levels + 1)
            observed = np.array([(b == l).sum() for l in levels], dtype=np.float64)
            expected = np.array([(a == l).mean() for l in levels]) * b.size
            expected = np.maximum(expected, _EPS)
            chi_vals.append(float(np.sum((observed - expected) ** 2 / expected)))
    ks = float(np.mean(ks_vals)) if ks_vals else None
    chi2 = float(np.mean(chi_vals)) if chi_vals else None
    return ks, chi2


def _features(table: Table, mu: np.ndarray, sd: np.ndarray, skip: int | None = None) -> np.ndarray:
    """Standardized continuous + one-hot categorical design matrix."""
    if not table.fully_observed():
        raise DataError("joint metrics need fully observed tables")
    blocks = []
    for j, col in enumerate(table.schema):
        if j == skip:
            continue
        v = table.values[:, j]
        if col.kind is ColumnKind.CONTINUOUS:
            blocks.append(((v - mu[j]) / sd[j])[:, None])
        else:
            onehot = np.zeros((table.n, col.num_levels))
            onehot[np.arange(table.n), v.astype(np.int64) - 1] = 1.0
            blocks.append(onehot)
    return np.hstack(blocks)


def _real_stats(real: Table) -> tuple[np.ndarray, np.ndarray]:
    mu = np.zeros(real.p)
    sd = np.ones(real.p)
    for j, col in enumerate(real.schema):
        if col.kind is ColumnKind.CONTINUOUS:
            v = real.column_observed(j)
            mu[j] = v.mean()
            s = v.std()
            sd[j] = s if s > 1e-12 else 1.0
    return mu, sd


def _pairwise_sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] + (y * y).sum(1)[None, :] - 2.0 * (x @ y.T)
    return np.maximum(d, 0.0)


def _subsample(n: int, max_rows: int, rng: np.random.Generator) -> np.ndarray:
    if n <= max_rows:
        return np.arange(n)
    return np.sort(rng.choice(n, size=max_rows, replace=False))


def mmd(real: Table, synth: Table, max_rows: int = 1000, seed: int = 0) -> float:
    """Unbiased squared maximum mean discrepancy with a Gaussian kernel whose
    bandwidth is the median pairwise distance of the pooled subsample.
    Negative estimates clamp to 0."""
    _check_same_schema(real, synth)
    mu, sd = _real_stats(real)
    rng = substream(seed, "mmd")
    x = _features(real, mu, sd)[_subsample(real.n, max_rows, rng)]
    y = _features(synth, mu, sd)[_subsample(synth.n, max_rows, rng)]
    pooled = np.vstack([x, y])
    dist = np.sqrt(_pairwise_sq_dists(pooled, pooled))
    iu = np.triu_indices(pooled.shape[0], k=1)
    h = float(np.median(dist[iu]))
    if h <= 0.0:
        h = 1.0
    kern = np.exp(-(dist**2) / (2.0 * h * h))
    n, m = x.shape[0], y.shape[0]
    if n < 2 or m < 2:
        raise DataError("mmd needs at least 2 rows per table")
    kxx = kern[:n, :n]
    kyy = kern[n:, n:]
    kxy = kern[:n, n:]
    a = (kxx.sum() - np.trace(kxx)) / (n * (n - 1))
    b = (kyy.sum() - np.trace(kyy)) / (m * (m - 1))
    return float(max(a + b - 2.0 * kxy.mean(), 0.0))


def wasserstein1(real: Table, synth: Table, seed: int = 0) -> float:
    """Column-wise decomposition: exact 1-d W1 on matched order statistics for
    continuous columns (after subsampling both to equal size), total-variation
    distance of level frequencies for categorical columns; mean over columns."""
    _check_same_schema(real, synth)
    rng = substream(seed, "wasserstein")
    vals = []
    for j, col in enumerate(real.schema):
        a = real.column_observed(j)
        b = synth.column_observed(j)
        if col.kind is ColumnKind.CONTINUOUS:
            k = min(a.size, b.size)
            if a.size > k:
                a = a[rng.choice(a.size, size=k, replace=False)]
            if b.size > k:
                b = b[rng.choice(b.size, size=k, replace=False)]
            vals.append(float(np.mean(np.abs(np.sort(a) - np.sort(b)))))
        else:
            levels = np.arange(1, col.num_levels + 1)
            fa = np.array([(a == l).mean() for l in levels])
            fb = np.array([(b == l).mean() for l in levels])
            vals.append(float(0.5 * np.sum(np.abs(fa - fb))))
    return float(np.mean(vals))


def dcr(real: Table, synth: Table) -> float:
    """5th percentile of all real-to-synthetic Euclidean distances over
    continuous columns (both standardized by the real statistics)."""
    _check_same_schema(real, synth)
    cont = [j for j, c in enumerate(real.schema) if c.kind is ColumnKind.CONTINUOUS]
    if not cont:
        raise NoContinuousColumns("distance-to-closest-record needs a continuous column")
    mu, sd = _real_stats(real)
    xr = (real.values[:, cont] - mu[cont]) / sd[cont]
    xs = (synth.values[:, cont] - mu[cont]) / sd[cont]
    if not (real.fully_observed() and synth.fully_observed()):
        raise DataError("dcr needs fully observed tables")
    d = np.sqrt(_pairwise_sq_dists(xr, xs))
    return float(np.percentile(d.ravel(), 5.0))


def _knn_predict(train_x: np.ndarray, train_y: np.ndarray, test_x: np.ndarray, k: int, vote: bool):
    preds = np.empty(test_x.shape[0])
    for i in range(test_x.shape[0]):
        d = ((train_x - test_x[i]) ** 2).sum(1)
        nn = np.argsort(d, kind="stable")[:k]
        if vote:
            counts = np.bincount(train_y[nn].astype(np.int64))
            preds[i] = counts.argmax()
        else:
            preds[i] = train_y[nn].mean()
    return preds


def utility_proxy(
    real_train: Table, synth: Table, test: Table, target_column: int
) -> float:
    """Directional machine-learning-utility proxy with a 5-nearest-neighbor
    learner fitted on the synthetic table and scored on the test table.

    Continuous target: SMAPE (0/0 counts as 0). Categorical target: macro F1
    over the schema levels with empty-class F1 = 0. Features are standardized
    with the real training table's statistics. The learner breaks distance
    ties by lower row index.
    """
    _check_same_schema(real_train, synth)
    _check_same_schema(real_train, test)
    if synth.n == 0:
        raise EmptyTrain("synthetic training table is empty")
    mu, sd = _real_stats(real_train)
    train_x = _features(synth, mu, sd, skip=target_column)
    test_x = _features(test, mu, sd, skip=target_column)
    train_y = synth.values[:, target_column]
    test_y = test.values[:, target_column]
    k = min(5, synth.n)
    col = real_train.schema[target_column]
    if col.kind is ColumnKind.CONTINUOUS:
        preds = _knn_predict(train_x, train_y, test_x, k, vote=False)
        denom = np.abs(preds) + np.abs(test_y)
        terms = np.where(denom > 0, 2.0 * np.abs(preds - test_y) / np.where(denom > 0, denom, 1.0), 0.0)
        return float(terms.mean())
    preds = _knn_predict(train_x, train_y, test_x, k, vote=True)
    f1s = []
    for level in range(1, col.num_levels + 1):
        tp = np.sum((preds == level) & (test_y == level))
        fp = np.sum((preds == level) & (test_y != level))
        fn = np.sum((preds != level) & (test_y == level))
        denom = 2 * tp + fp + fn
        f1s.append(2.0 * tp / denom if denom > 0 else 0.0)
    return float(np.mean(f1s))
