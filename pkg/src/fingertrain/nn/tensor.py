"""Minimal reverse-mode automatic differentiation over float64 arrays.

Every operation records its parents and a closure that routes the output
gradient back to them; ``backward`` runs the closures in reverse topological
order. The primitive set is exactly what the GIN stack needs: dense linear
algebra, concatenation, row gather, segment pooling, the three activations,
dropout, and the losses.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

from fingertrain.errors import GradientError

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn", "name")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward_fn=None, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._backward_fn = _backward_fn
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(_as_tensor(other), constant(-1.0)))

    def __neg__(self):
        return mul(self, constant(-1.0))

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad}{tag})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data, name: str = "") -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else constant(x)


def _node(data, parents, backward_fn) -> Tensor:
    requires = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=requires, _parents=tuple(parents), _backward_fn=backward_fn if requires else None)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- arithmetic -----------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backward_fn(grad):
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(grad, b.data.shape))

    return _node(out_data, (a, b), backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backward_fn(grad):
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(grad * a.data, b.data.shape))

    return _node(out_data, (a, b), backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data @ b.data

    def backward_fn(grad):
        if a.requires_grad:
            a._accumulate(grad @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ grad)

    return _node(out_data, (a, b), backward_fn)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    old = a.data.shape
    out_data = a.data.reshape(shape)

    def backward_fn(grad):
        if a.requires_grad:
            a._accumulate(grad.reshape(old))

    return _node(out_data, (a,), backward_fn)


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    offsets = np.cumsum([0] + [t.data.shape[axis] for t in tensors])

    def backward_fn(grad):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * grad.ndim
                sl[axis] = slice(start, stop)
                t._accumulate(grad[tuple(sl)])

    return _node(out_data, tuple(tensors), backward_fn)


def tensor_sum(a: Tensor) -> Tensor:
    out_data = np.asarray(a.data.sum())

    def backward_fn(grad):
        if a.requires_grad:
            a._accumulate(np.broadcast_to(grad, a.data.shape).copy())

    return _node(out_data, (a,), backward_fn)


def tensor_mean(a: Tensor) -> Tensor:
    n = a.data.size
    out_data = np.asarray(a.data.mean())

    def backward_fn(grad):
        if a.requires_grad:
            a._accumulate(np.broadcast_to(grad / n, a.data.shape).copy())

    return _node(out_data, (a,), backward_fn)


# -- indexing and segments --------------------------------------------------


def gather_rows(table: Tensor, index: np.ndarray) -> Tensor:
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= table.data.shape[0]):
        raise IndexError(
            f"gather index out of range: [{index.min()}, {index.max()}] vs {table.data.shape[0]} rows"
        )
    out_data = table.data[index]

    def backward_fn(grad):
        if table.requires_grad:
            acc = np.zeros_like(table.data)
            np.add.at(acc, index, grad)
            table._accumulate(acc)

    return _node(out_data, (table,), backward_fn)


def segment_sum(x: Tensor, segments: np.ndarray, n_segments: int) -> Tensor:
    segments = np.asarray(segments, dtype=np.int64)
    out_data = np.zeros((n_segments,) + x.data.shape[1:], dtype=np.float64)
    np.add.at(out_data, segments, x.data)

    def backward_fn(grad):
        if x.requires_grad:
            x._accumulate(grad[segments])

    return _node(out_data, (x,), backward_fn)


def segment_mean(x: Tensor, segments: np.ndarray, n_segments: int) -> Tensor:
    segments = np.asarray(segments, dtype=np.int64)
    counts = np.bincount(segments, minlength=n_segments).astype(np.float64)
    counts = np.maximum(counts, 1.0)
    out_data = np.zeros((n_segments,) + x.data.shape[1:], dtype=np.float64)
    np.add.at(out_data, segments, x.data)
    out_data /= counts[:, None] if x.data.ndim > 1 else counts

    def backward_fn(grad):
        if x.requires_grad:
            scaled = grad / (counts[:, None] if grad.ndim > 1 else counts)
            x._accumulate(scaled[segments])

    return _node(out_data, (x,), backward_fn)


def segment_max(x: Tensor, segments: np.ndarray, n_segments: int) -> Tensor:
    """Per-segment elementwise max; gradient routes to the first maximiser."""
    segments = np.asarray(segments, dtype=np.int64)
    out_data = np.full((n_segments,) + x.data.shape[1:], -np.inf, dtype=np.float64)
    np.maximum.at(out_data, segments, x.data)

    n = x.data.shape[0]
    winner = np.full(out_data.shape, n, dtype=np.int64)
    eq_rows, eq_cols = np.nonzero(x.data == out_data[segments])
    np.minimum.at(winner, (segments[eq_rows], eq_cols), eq_rows)

    def backward_fn(grad):
        if x.requires_grad:
            acc = np.zeros_like(x.data)
            seg_idx, col_idx = np.nonzero(winner < n)
            np.add.at(acc, (winner[seg_idx, col_idx], col_idx), grad[seg_idx, col_idx])
            x._accumulate(acc)

    return _node(out_data, (x,), backward_fn)


# -- activations -------------------------------------------------------------


def hardswish(a: Tensor) -> Tensor:
    x = a.data
    out_data = x * np.clip(x + 3.0, 0.0, 6.0) / 6.0

    def backward_fn(grad):
        if a.requires_grad:
            local = np.where(x <= -3.0, 0.0, np.where(x >= 3.0, 1.0, (2.0 * x + 3.0) / 6.0))
            a._accumulate(grad * local)

    return _node(out_data, (a,), backward_fn)


def gelu(a: Tensor) -> Tensor:
    x = a.data
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    out_data = x * cdf

    def backward_fn(grad):
        if a.requires_grad:
            pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
            a._accumulate(grad * (cdf + x * pdf))

    return _node(out_data, (a,), backward_fn)


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    x = a.data
    out_data = np.where(x >= 0.0, x, slope * x)

    def backward_fn(grad):
        if a.requires_grad:
            a._accumulate(grad * np.where(x >= 0.0, 1.0, slope))

    return _node(out_data, (a,), backward_fn)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.clip(x, -745, None))), np.exp(np.clip(x, None, 709)) / (1.0 + np.exp(np.clip(x, None, 709))))

    def backward_fn(grad):
        if a.requires_grad:
            a._accumulate(grad * out_data * (1.0 - out_data))

    return _node(out_data, (a,), backward_fn)


def dropout(a: Tensor, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    if not training or p <= 0.0:
        return a
    mask = (rng.random(a.data.shape) >= p) / (1.0 - p)
    out_data = a.data * mask

    def backward_fn(grad):
        if a.requires_grad:
            a._accumulate(grad * mask)

    return _node(out_data, (a,), backward_fn)


# -- losses -------------------------------------------------------------------


def mse(pred: Tensor, target: Tensor) -> Tensor:
    diff = pred.data - target.data
    out_data = np.asarray((diff * diff).mean())

    def backward_fn(grad):
        scale = 2.0 / pred.data.size
        if pred.requires_grad:
            pred._accumulate(grad * scale * diff)
        if target.requires_grad:
            target._accumulate(-grad * scale * diff)

    return _node(out_data, (pred, target), backward_fn)


def bce(prob: Tensor, target: Tensor, eps: float = 1e-12) -> Tensor:
    p = prob.data
    y = target.data
    out_data = np.asarray(-(y * np.log(p + eps) + (1.0 - y) * np.log(1.0 - p + eps)).mean())

    def backward_fn(grad):
        if prob.requires_grad:
            local = (-y / (p + eps) + (1.0 - y) / (1.0 - p + eps)) / p.size
            prob._accumulate(grad * local)

    return _node(out_data, (prob, target), backward_fn)


def weighted_bce_with_logits(
    logits: Tensor,
    targets: np.ndarray,
    pos_weight: np.ndarray,
    bit_mask: np.ndarray,
) -> Tensor:
    """Per-bit class-weighted binary cross-entropy on logits.

    ``pos_weight[j]`` scales the positive term of bit j; masked-out bits
    contribute nothing. The mean runs over batch rows and unmasked bits.
    """
    z = logits.data
    y = np.asarray(targets, dtype=np.float64)
    w = np.asarray(pos_weight, dtype=np.float64)
    m = np.asarray(bit_mask, dtype=np.float64)
    denom = z.shape[0] * max(m.sum(), 1.0)

    softplus_neg = np.logaddexp(0.0, -z)  # log(1 + exp(-z))
    softplus_pos = np.logaddexp(0.0, z)
    per_elem = (w * y * softplus_neg + (1.0 - y) * softplus_pos) * m
    out_data = np.asarray(per_elem.sum() / denom)

    def backward_fn(grad):
        if logits.requires_grad:
            sig = 1.0 / (1.0 + np.exp(-np.clip(z, -745, 709)))
            local = (w * y * (sig - 1.0) + (1.0 - y) * sig) * m / denom
            logits._accumulate(grad * local)

    return _node(out_data, (logits,), backward_fn)


ACTIVATIONS = {"hardswish": hardswish, "gelu": gelu, "leaky_relu": leaky_relu}


# -- backward ------------------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Populate gradients of every reachable requires_grad tensor."""
    if loss.data.size != 1:
        raise GradientError("backward needs a scalar loss")
    if not loss.requires_grad:
        raise GradientError("backward through an unrecorded tensor (requires_grad is False)")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))

    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)
