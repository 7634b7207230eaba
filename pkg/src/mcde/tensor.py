"""Dense tensors on numpy with a reverse-mode tape and an AdamW optimizer.

Ops record onto the active `Tape`; creation order is a valid topological
order, so `Tape.backward` just walks the record in reverse. Without an active
tape the same functions run as plain numpy, which is the inference path.
Arithmetic stays in the input dtype (float32 for training) with float64
accumulators inside reductions.
"""

from __future__ import annotations

import math
import threading

import numpy as np
from scipy.special import erf

from .errors import NonFinite, ShapeMismatch

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)

_state = threading.local()


def _active() -> "Tape | None":
    return getattr(_state, "tape", None)


class Tensor:
    """A dense float array, optionally marked as a trainable leaf."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of primitive ops for one backward pass."""

    def __init__(self):
        self._nodes: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __enter__(self) -> "Tape":
        if _active() is not None:
            raise RuntimeError("a Tape is already active in this thread")
        _state.tape = self
        return self

    def __exit__(self, *exc) -> None:
        _state.tape = None

    def _record(self, out: Tensor, parents: tuple[Tensor, ...], backward) -> None:
        self._nodes.append((out, parents, backward))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into `.grad` of every requires_grad leaf."""
        if loss.data.size != 1:
            raise ShapeMismatch("backward target must be a scalar")
        produced = {id(out) for out, _, _ in self._nodes}
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for out, parents, bw in reversed(self._nodes):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for parent, gp in zip(parents, bw(g)):
                if gp is None:
                    continue
                if parent.requires_grad:
                    parent.grad = gp if parent.grad is None else parent.grad + gp
                elif id(parent) in produced:
                    acc = grads.get(id(parent))
                    grads[id(parent)] = gp if acc is None else acc + gp


def zero_grads(params) -> None:
    for p in params:
        p.grad = None


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFinite(f"{op} produced non-finite values")


def _emit(value: np.ndarray, op: str, parents: tuple[Tensor, ...], backward) -> Tensor:
    _check_finite(value, op)
    out = Tensor(value)
    tape = _active()
    if tape is not None:
        tape._record(out, parents, backward)
    return out


def _sum_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcasted gradient back to the original operand shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeMismatch(f"add: cannot broadcast {a.shape} with {b.shape}")
    va, vb = a.shape, b.shape

    def backward(g):
        return _sum_to(g, va), _sum_to(g, vb)

    return _emit(out, "add", (a, b), backward)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def backward(g):
        return (g * s,)

    return _emit(a.data * s, "scale", (a,), backward)


def const_mul(a: Tensor, factors: np.ndarray) -> Tensor:
    """Elementwise product with a non-trainable factor array (dropout masks)."""
    factors = np.asarray(factors, dtype=a.dtype)
    try:
        out = a.data * factors
    except ValueError:
        raise ShapeMismatch(f"const_mul: cannot broadcast {a.shape} with {factors.shape}")

    def backward(g):
        return (_sum_to(g * factors, a.shape),)

    return _emit(out, "const_mul", (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    va, vb = a.data, b.data
    if va.ndim < 2 or vb.ndim < 2:
        raise ShapeMismatch("matmul operands must have ndim >= 2")
    if va.shape[-1] != vb.shape[-2]:
        raise ShapeMismatch(f"matmul: inner dims {va.shape} @ {vb.shape}")
    try:
        out = va @ vb
    except ValueError:
        raise ShapeMismatch(f"matmul: cannot broadcast {va.shape} @ {vb.shape}")

    def backward(g):
        ga = _sum_to(g @ vb.swapaxes(-1, -2), va.shape)
        if vb.ndim == 2 and va.ndim > 2:
            # shared weight: fold the batch into the row dimension so BLAS
            # performs the reduction instead of a big temporary
            gb = va.reshape(-1, va.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = _sum_to(va.swapaxes(-1, -2) @ g, vb.shape)
        return ga, gb

    return _emit(out, "matmul", (a, b), backward)


def softmax(x: Tensor) -> Tensor:
    """Row softmax over the last axis, max-subtracted for stability."""
    v = x.data
    e = np.exp(v - v.max(axis=-1, keepdims=True))
    out = (e / e.sum(axis=-1, keepdims=True, dtype=np.float64)).astype(v.dtype)

    def backward(g):
        inner = (g * out).sum(axis=-1, keepdims=True, dtype=np.float64).astype(v.dtype)
        return ((g - inner) * out,)

    return _emit(out, "softmax", (x,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to mean 0 / variance 1, then apply gain and bias."""
    v = x.data
    d = v.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeMismatch(f"layer_norm: gain/bias must have shape ({d},)")
    mu = v.mean(axis=-1, keepdims=True, dtype=np.float64)
    xc = v - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True, dtype=np.float64)
    inv = (1.0 / np.sqrt(var + eps)).astype(v.dtype)
    xhat = (xc * inv).astype(v.dtype)
    out = gain.data * xhat + bias.data

    def backward(g):
        gxh = g * gain.data
        m1 = gxh.mean(axis=-1, keepdims=True, dtype=np.float64).astype(v.dtype)
        m2 = (gxh * xhat).mean(axis=-1, keepdims=True, dtype=np.float64).astype(v.dtype)
        gx = inv * (gxh - m1 - xhat * m2)
        axes = tuple(range(g.ndim - 1))
        ggain = (g * xhat).sum(axis=axes, dtype=np.float64).astype(v.dtype)
        gbias = g.sum(axis=axes, dtype=np.float64).astype(v.dtype)
        return gx, ggain, gbias

    return _emit(out, "layer_norm", (x, gain, bias), backward)


def gelu(x: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    v = x.data
    phi_cdf = 0.5 * (1.0 + erf(v * _INV_SQRT2))
    out = (v * phi_cdf).astype(v.dtype)

    def backward(g):
        pdf = np.exp(-0.5 * v * v) * _INV_SQRT2PI
        return ((phi_cdf + v * pdf).astype(v.dtype) * g,)

    return _emit(out, "gelu", (x,), backward)


def embedding_gather(table: Tensor, indices: np.ndarray) -> Tensor:
    """Rows of `table` selected by an integer index array."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeMismatch(
            f"embedding_gather: index outside [0, {table.shape[0]})"
        )
    out = table.data[idx]

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        return (gt,)

    return _emit(out, "embedding_gather", (table,), backward)


def concat(parts: list[Tensor], axis: int) -> Tensor:
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeMismatch("concat: incompatible part shapes")
    sizes = [p.data.shape[axis] for p in parts]

    def backward(g):
        return tuple(np.split(g, np.cumsum(sizes)[:-1], axis=axis))

    return _emit(out, "concat", tuple(parts), backward)


def narrow(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """Slice [start, stop) along one axis."""
    if not 0 <= start < stop <= x.shape[axis]:
        raise ShapeMismatch(f"narrow: [{start}, {stop}) outside axis of size {x.shape[axis]}")
    sl = tuple(slice(start, stop) if i == axis else slice(None) for i in range(x.data.ndim))
    out = x.data[sl].copy()

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[sl] = g
        return (gx,)

    return _emit(out, "narrow", (x,), backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = x.data.shape

    def backward(g):
        return (g.reshape(old),)

    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeMismatch(f"reshape: {old} -> {shape}")
    return _emit(out, "reshape", (x,), backward)


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return (np.transpose(g, inverse),)

    return _emit(np.transpose(x.data, axes), "transpose", (x,), backward)


def cross_entropy(probs: Tensor, targets: np.ndarray, weights: np.ndarray | None = None) -> Tensor:
    """Weighted sum of -log p[i, target_i] over a (B, L) probability batch."""
    v = probs.data
    if v.ndim != 2:
        raise ShapeMismatch("cross_entropy expects a (B, L) probability matrix")
    t = np.asarray(targets, dtype=np.int64)
    if t.shape != (v.shape[0],):
        raise ShapeMismatch(f"cross_entropy: targets must have shape ({v.shape[0]},)")
    if t.size and (t.min() < 0 or t.max() >= v.shape[1]):
        raise ShapeMismatch("cross_entropy: target index outside [0, L)")
    w = np.ones(v.shape[0], dtype=v.dtype) if weights is None else np.asarray(weights, dtype=v.dtype)
    rows = np.arange(v.shape[0])
    pt = v[rows, t]
    active = w != 0
    with np.errstate(divide="ignore"):
        logs = np.where(active, np.log(np.where(active, pt, 1.0)), 0.0)
    out = np.asarray(-(w * logs).sum(dtype=np.float64), dtype=v.dtype)

    def backward(g):
        gp = np.zeros_like(v)
        gp[rows[active], t[active]] = -(w[active] / pt[active]) * g
        return (gp,)

    return _emit(out, "cross_entropy", (probs,), backward)


class AdamState:
    """First/second moment buffers plus the shared step counter."""

    def __init__(self, params: list[Tensor]):
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def adamw_step(
    params: list[Tensor],
    state: AdamState,
    *,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """Adam update with bias correction plus decoupled weight decay.

    The decay term -lr * weight_decay * theta is applied separately from the
    adaptive step and uses the pre-step parameter value.
    """
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        step = (m / c1) / (np.sqrt(v / c2) + eps)
        p.data = p.data - lr * step - lr * weight_decay * p.data
        _check_finite(p.data, "adamw_step")
