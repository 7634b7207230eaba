"""Synthesis by iterative unmasking, conditional completion, multiple
imputation, and the pooled-inference evaluation of imputation quality.

Each generated row owns a decorrelated random stream, so results are
independent of batching. A row starts fully masked (or with its observed
labels), visits the remaining positions in a fresh uniform random order,
samples each label from the temperature-scaled head distribution, and finally
decodes continuous bins by drawing a quantile level from the open bin interval
and inverting the column ECDF.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .cdf import EmpiricalCdf, inv_cdf
from .dataset import ColumnKind, ColumnSpec, Table
from .discretize import BinGrid, bin_interval, discretize
from .errors import ConfigError, DataError, DegenerateColumn
from .model import ModelParams, forward_probs
from .rng import sequence, spawn_streams

_CHUNK = 4096


@dataclass(frozen=True)
class SynthesisConfig:
    n_samples: int
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 0:
            raise ConfigError("n_samples must be >= 0")
        if self.temperature <= 0.0:
            raise ConfigError("temperature must be > 0")


@dataclass
class ImputationPool:
    """M completed tables sharing schema and dimensions with the corrupted input."""

    tables: list[Table]

    def __post_init__(self):
        if not self.tables:
            raise DataError("imputation pool is empty")
        first = self.tables[0]
        for t in self.tables:
            if t.values.shape != first.values.shape or not t.fully_observed():
                raise DataError("pool tables must be complete and share dimensions")

    @property
    def M(self) -> int:
        return len(self.tables)


def _visit_order(token_row: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random visiting order over the masked (token 0) positions of one row."""
    missing = np.flatnonzero(token_row == 0)
    if missing.size == 0:
        return missing
    return missing[rng.permutation(missing.size)]


def _sample_label(probs: np.ndarray, u: float) -> int:
    cum = np.cumsum(probs)
    idx = int(np.searchsorted(cum, u, side="right"))
    return min(idx, probs.size - 1) + 1


def _fill_tokens(
    params: ModelParams,
    tokens: np.ndarray,
    temperature: float,
    row_rngs: list[np.random.Generator],
) -> np.ndarray:
    """Sample labels for every 0 token, one column per row per step."""
    tokens = tokens.copy()
    B = tokens.shape[0]
    orders = [_visit_order(tokens[i], row_rngs[i]) for i in range(B)]
    max_steps = max((o.size for o in orders), default=0)
    for step in range(max_steps):
        active = np.flatnonzero([o.size > step for o in orders])
        probs = forward_probs(params, tokens[active], temperature)
        for ai, i in enumerate(active):
            j = int(orders[i][step])
            tokens[i, j] = _sample_label(probs[j][ai], row_rngs[i].random())
    return tokens


def _open_uniform(lo: float, hi: float, rng: np.random.Generator) -> float:
    """Uniform draw from the open interval (lo, hi); endpoint hits are redrawn."""
    while True:
        u = lo + rng.random() * (hi - lo)
        if lo < u < hi:
            return u


def _decode(
    schema: list[ColumnSpec],
    cdfs: dict[int, EmpiricalCdf],
    grid: BinGrid,
    tokens: np.ndarray,
    fill: np.ndarray,
    row_rngs: list[np.random.Generator],
) -> np.ndarray:
    """Values for the filled cells (NaN elsewhere); continuous cells draw a
    quantile level inside the sampled bin and invert the ECDF."""
    values = np.full(tokens.shape, np.nan)
    for i in range(tokens.shape[0]):
        for j in np.flatnonzero(fill[i]):
            if schema[j].kind is ColumnKind.CONTINUOUS:
                lo, hi = bin_interval(grid, int(tokens[i, j]))
                values[i, j] = inv_cdf(cdfs[j], _open_uniform(lo, hi, row_rngs[i]))
            else:
                values[i, j] = float(tokens[i, j])
    return values


def synthesize(
    params: ModelParams,
    schema: list[ColumnSpec],
    cdfs: dict[int, EmpiricalCdf],
    grid: BinGrid,
    cfg: SynthesisConfig,
) -> Table:
    """Generate cfg.n_samples fully observed rows. Deterministic given cfg.seed."""
    if len(schema) != params.p:
        raise DataError("schema width does not match the model")
    n, p = cfg.n_samples, params.p
    tokens = np.zeros((n, p), dtype=np.int64)
    values = np.empty((n, p), dtype=np.float64)
    row_rngs = spawn_streams(cfg.seed, "generate", n)
    for start in range(0, n, _CHUNK):
        rows = slice(start, min(start + _CHUNK, n))
        rngs = row_rngs[rows]
        filled = _fill_tokens(params, tokens[rows], cfg.temperature, rngs)
        tokens[rows] = filled
        values[rows] = _decode(schema, cdfs, grid, filled, np.ones_like(filled, dtype=bool), rngs)
    return Table(schema, values, np.ones((n, p), dtype=bool))


def complete_row(
    params: ModelParams,
    schema: list[ColumnSpec],
    cdfs: dict[int, EmpiricalCdf],
    grid: BinGrid,
    label_row: np.ndarray,
    temperature: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Fill the 0 labels of one row; observed labels are never altered.

    Returns the completed label row and a value row holding decoded values at
    the filled positions (NaN elsewhere; the caller keeps original values for
    observed cells). A row with no 0 labels is returned unchanged with no
    random draws.
    """
    label_row = np.asarray(label_row, dtype=np.int64)
    if label_row.shape != (params.p,):
        raise DataError(f"label row must have shape ({params.p},)")
    tokens = label_row[None, :]
    fill = tokens == 0
    if not fill.any():
        return label_row.copy(), np.full(params.p, np.nan)
    filled = _fill_tokens(params, tokens, temperature, [rng])
    values = _decode(schema, cdfs, grid, filled, fill, [rng])
    return filled[0], values[0]


def multiple_impute(
    params: ModelParams,
    schema: list[ColumnSpec],
    cdfs: dict[int, EmpiricalCdf],
    grid: BinGrid,
    corrupted: Table,
    M: int,
    temperature: float,
    seed: int,
) -> ImputationPool:
    """M independent completions of a corrupted table.

    Observed cells are copied bit-identically into every completed table;
    missing cells are sampled from the model conditioned on the observed ones.
    """
    if M < 1:
        raise ConfigError("M must be >= 1")
    if temperature <= 0.0:
        raise ConfigError("temperature must be > 0")
    if [c.name for c in corrupted.schema] != [c.name for c in schema]:
        raise DataError("corrupted table does not match the model schema")
    labels = discretize(corrupted, cdfs, grid)
    n = corrupted.n
    children = sequence(seed, "impute").spawn(M)
    tables = []
    for m in range(M):
        row_rngs = [np.random.default_rng(c) for c in children[m].spawn(n)] if n else []
        values = corrupted.values.copy()
        for start in range(0, n, _CHUNK):
            rows = slice(start, min(start + _CHUNK, n))
            rngs = row_rngs[rows]
            filled = _fill_tokens(params, labels[rows], temperature, rngs)
            fill = labels[rows] == 0
            decoded = _decode(schema, cdfs, grid, filled, fill, rngs)
            block = values[rows]
            block[fill] = decoded[fill]
            values[rows] = block
        tables.append(Table(schema, values, np.ones((n, corrupted.p), dtype=bool)))
    return ImputationPool(tables)


class RubinResult(NamedTuple):
    bias: float
    covered: bool
    width: float


def rubin_evaluate(pool: ImputationPool, complete: Table, column: int) -> RubinResult:
    """Pooled interval inference for the share of cells above the column mean.

    The point estimate of each completed table is combined by Rubin's rules:
    total variance = mean within-imputation variance + (M+1)/M times the
    between-imputation sample variance of the point estimates.
    """
    if complete.schema[column].kind is not ColumnKind.CONTINUOUS:
        raise DataError("pooled inference is defined for continuous columns")
    if not complete.observed[:, column].all():
        raise DataError("ground-truth column must be fully observed")
    x = complete.values[:, column]
    if np.all(x == x[0]):
        raise DegenerateColumn(f"column {column} of the ground truth is constant")
    n = x.size
    q_star = float(np.mean(x > x.mean()))
    q_hats, u_hats = [], []
    for t in pool.tables:
        xm = t.values[:, column]
        q = float(np.mean(xm > xm.mean()))
        q_hats.append(q)
        u_hats.append(q * (1.0 - q) / n)
    q_bar = float(np.mean(q_hats))
    between = float(np.var(q_hats, ddof=1)) if pool.M > 1 else 0.0
    total_var = float(np.mean(u_hats)) + (pool.M + 1) / pool.M * between
    half = 1.96 * np.sqrt(total_var)
    return RubinResult(
        bias=abs(q_bar - q_star),
        covered=bool(q_bar - half <= q_star <= q_bar + half),
        width=float(2.0 * half),
    )
