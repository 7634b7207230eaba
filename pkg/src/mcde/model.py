"""Masked-table network: per-column embeddings, pre-norm transformer encoder,
per-column classification heads, the masked losses, and the training loop.

Every column has its own embedding table of shape (L_j + 1) x d whose row 0 is
the shared mask/missing token for that column, and its own head producing a
distribution over that column's L_j labels. The encoder sees the p column
tokens as a sequence; no positional encodings are added because the
column-specific tables already identify positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from . import tensor as T
from .dataset import Table
from .discretize import BinGrid, column_level_counts, discretize
from .errors import ConfigError, DataError, NonFinite
from .masking import sample_masks
from .rng import substream
from .tensor import Tape, Tensor


@dataclass
class ModelConfig:
    embed_dim: int = 128
    n_heads: int = 4
    n_layers: int = 2
    ffn_dim: int | None = None  # defaults to 4 * embed_dim
    dropout: float = 0.0
    n_bins: int = 50
    learning_rate: float = 1e-3
    weight_decay: float = 1e-3
    batch_size: int = 1024
    epochs: int = 500

    def __post_init__(self):
        if self.embed_dim < 1 or self.n_heads < 1 or self.n_layers < 1:
            raise ConfigError("embed_dim, n_heads and n_layers must be positive")
        if self.embed_dim % self.n_heads != 0:
            raise ConfigError("embed_dim must be divisible by n_heads")
        if self.n_bins < 2:
            raise ConfigError("n_bins must be >= 2")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be positive")

    @property
    def resolved_ffn_dim(self) -> int:
        return 4 * self.embed_dim if self.ffn_dim is None else self.ffn_dim

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_json(cls, raw: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**raw)


@dataclass
class LayerParams:
    ln1_g: Tensor
    ln1_b: Tensor
    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor
    ln2_g: Tensor
    ln2_b: Tensor
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor


@dataclass
class ModelParams:
    """All trainable tensors plus the per-column label vocabulary sizes."""

    level_counts: list[int]
    n_heads: int
    embeddings: list[Tensor]
    layers: list[LayerParams]
    final_g: Tensor
    final_b: Tensor
    heads: list[tuple[Tensor, Tensor]]

    def named(self) -> list[tuple[str, Tensor]]:
        out = [(f"emb{j}", e) for j, e in enumerate(self.embeddings)]
        for i, lp in enumerate(self.layers):
            for name in (
                "ln1_g", "ln1_b", "wq", "bq", "wk", "bk", "wv", "bv",
                "wo", "bo", "ln2_g", "ln2_b", "w1", "b1", "w2", "b2",
            ):
                out.append((f"l{i}.{name}", getattr(lp, name)))
        out.append(("final_g", self.final_g))
        out.append(("final_b", self.final_b))
        for j, (w, b) in enumerate(self.heads):
            out.append((f"head{j}.w", w))
            out.append((f"head{j}.b", b))
        return out

    def all(self) -> list[Tensor]:
        return [t for _, t in self.named()]

    @property
    def p(self) -> int:
        return len(self.level_counts)


def init_params(
    level_counts: list[int],
    config: ModelConfig,
    rng: np.random.Generator,
    dtype=np.float32,
) -> ModelParams:
    """Fresh parameters: N(0, 0.02) weights and embeddings, unit gains, zero biases."""
    d = config.embed_dim
    f = config.resolved_ffn_dim

    def normal(*shape):
        return Tensor(rng.normal(0.0, 0.02, size=shape).astype(dtype), requires_grad=True)

    def ones(*shape):
        return Tensor(np.ones(shape, dtype=dtype), requires_grad=True)

    def zeros(*shape):
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)

    embeddings = [normal(lc + 1, d) for lc in level_counts]
    layers = []
    for _ in range(config.n_layers):
        layers.append(
            LayerParams(
                ln1_g=ones(d), ln1_b=zeros(d),
                wq=normal(d, d), bq=zeros(d),
                wk=normal(d, d), bk=zeros(d),
                wv=normal(d, d), bv=zeros(d),
                wo=normal(d, d), bo=zeros(d),
                ln2_g=ones(d), ln2_b=zeros(d),
                w1=normal(d, f), b1=zeros(f),
                w2=normal(f, d), b2=zeros(d),
            )
        )
    heads = [(normal(d, lc), zeros(lc)) for lc in level_counts]
    return ModelParams(
        level_counts=list(level_counts),
        n_heads=config.n_heads,
        embeddings=embeddings,
        layers=layers,
        final_g=ones(d),
        final_b=zeros(d),
        heads=heads,
    )


def _dropout(x: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    if rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return T.const_mul(x, keep)


def _encoder_layer(
    x: Tensor, lp: LayerParams, n_heads: int, dropout: float, rng: np.random.Generator | None
) -> Tensor:
    B, p, d = x.shape
    dh = d // n_heads

    u = T.layer_norm(x, lp.ln1_g, lp.ln1_b)
    q = T.add(T.matmul(u, lp.wq), lp.bq)
    k = T.add(T.matmul(u, lp.wk), lp.bk)
    v = T.add(T.matmul(u, lp.wv), lp.bv)
    # (B, p, d) -> (B, H, p, dh)
    q = T.transpose(T.reshape(q, (B, p, n_heads, dh)), (0, 2, 1, 3))
    k = T.transpose(T.reshape(k, (B, p, n_heads, dh)), (0, 2, 1, 3))
    v = T.transpose(T.reshape(v, (B, p, n_heads, dh)), (0, 2, 1, 3))
    att = T.scale(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
    att = T.softmax(att)
    o = T.matmul(att, v)
    o = T.reshape(T.transpose(o, (0, 2, 1, 3)), (B, p, d))
    o = T.add(T.matmul(o, lp.wo), lp.bo)
    x = T.add(x, _dropout(o, dropout, rng))

    u2 = T.layer_norm(x, lp.ln2_g, lp.ln2_b)
    h = T.gelu(T.add(T.matmul(u2, lp.w1), lp.b1))
    h = T.add(T.matmul(h, lp.w2), lp.b2)
    return T.add(x, _dropout(h, dropout, rng))


def forward_logits(
    params: ModelParams,
    tokens: np.ndarray,
    *,
    dropout: float = 0.0,
    dropout_rng: np.random.Generator | None = None,
) -> list[Tensor]:
    """Head logits for a (B, p) token batch; token 0 is the mask embedding row."""
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 2 or tokens.shape[1] != params.p:
        raise DataError(f"token batch must have shape (B, {params.p})")
    if tokens.shape[0] == 0:
        raise DataError("token batch is empty")
    B, p = tokens.shape
    cols = [
        T.reshape(T.embedding_gather(params.embeddings[j], tokens[:, j]), (B, 1, -1))
        for j in range(p)
    ]
    x = T.concat(cols, axis=1)
    for lp in params.layers:
        x = _encoder_layer(x, lp, params.n_heads, dropout, dropout_rng)
    h = T.layer_norm(x, params.final_g, params.final_b)
    d = h.shape[-1]
    logits = []
    for j, (w, b) in enumerate(params.heads):
        hj = T.reshape(T.narrow(h, 1, j, j + 1), (B, d))
        logits.append(T.add(T.matmul(hj, w), b))
    return logits


def forward(params: ModelParams, tokens: np.ndarray) -> list[Tensor]:
    """Per-column probability rows pi_j (each sums to 1 along the last axis)."""
    return [T.softmax(z) for z in forward_logits(params, tokens)]


def forward_probs(params: ModelParams, tokens: np.ndarray, temperature: float = 1.0) -> list[np.ndarray]:
    """Inference probabilities with temperature applied to the logits."""
    if temperature <= 0.0:
        raise ConfigError("temperature must be > 0")
    return [
        T.softmax(T.scale(z, 1.0 / temperature)).data
        for z in forward_logits(params, tokens)
    ]


def loss_missing(
    pis: list[Tensor], labels: np.ndarray, mask: np.ndarray, observed: np.ndarray
) -> Tensor:
    """Batch-mean of -sum_{j: m_j=0, r_j=1} log pi_{j, y_j}."""
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask)
    observed = np.asarray(observed)
    B = labels.shape[0]
    total: Tensor | None = None
    for j, pi in enumerate(pis):
        w = ((mask[:, j] == 0) & (observed[:, j] == 1)).astype(pi.dtype)
        if np.any((w > 0) & (labels[:, j] < 1)):
            raise DataError(f"column {j}: loss target must be >= 1 where it is scored")
        targets = np.maximum(labels[:, j] - 1, 0)
        term = T.cross_entropy(pi, targets, w)
        total = term if total is None else T.add(total, term)
    return T.scale(total, 1.0 / B)


def loss_complete(pis: list[Tensor], labels: np.ndarray, mask: np.ndarray) -> Tensor:
    """Complete-data objective: every masked column is scored."""
    return loss_missing(pis, labels, mask, np.ones_like(np.asarray(labels)))


def train(
    table: Table,
    config: ModelConfig,
    grid: BinGrid,
    cdfs: dict,
    seed: int,
) -> tuple[ModelParams, list[float]]:
    """Fit by masked prediction; returns the parameters and per-epoch mean loss.

    Each step draws one fresh mask per row, feeds tokens y * min(m, r), and
    scores masked-but-observed cells only, so incomplete training data needs
    no special casing. Deterministic for a fixed seed.
    """
    labels = discretize(table, cdfs, grid)
    level_counts = column_level_counts(table.schema, grid.L)
    observed = table.observed.astype(np.int8)

    init_rng = substream(seed, "init")
    shuffle_rng = substream(seed, "shuffle")
    mask_rng = substream(seed, "mask")
    dropout_rng = substream(seed, "dropout") if config.dropout > 0 else None

    params = init_params(level_counts, config, init_rng)
    trainable = params.all()
    state = T.AdamState(trainable)
    n = table.n
    batch = min(config.batch_size, n)
    losses: list[float] = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            rows = order[start : start + batch]
            y = labels[rows]
            r = observed[rows]
            m = sample_masks(len(rows), table.p, mask_rng)
            tokens = y * np.minimum(m, r)
            try:
                T.zero_grads(trainable)
                with Tape() as tape:
                    pis = forward(params, tokens) if config.dropout == 0 else [
                        T.softmax(z)
                        for z in forward_logits(
                            params, tokens, dropout=config.dropout, dropout_rng=dropout_rng
                        )
                    ]
                    loss = loss_missing(pis, y, m, r)
                    tape.backward(loss)
                T.adamw_step(
                    trainable,
                    state,
                    lr=config.learning_rate,
                    weight_decay=config.weight_decay,
                )
            except NonFinite as err:
                raise NonFinite(f"epoch {epoch} batch {start // batch}: {err}") from err
            total += loss.item() * len(rows)
        losses.append(total / n)
    return params, losses
