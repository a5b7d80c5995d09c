"""Dense float64 tensors with tape-based reverse-mode automatic differentiation.

The graph is rebuilt from scratch on every loss evaluation: each operation
that touches a tensor with ``requires_grad`` records a backward closure on
the result. ``backward()`` walks the recorded closures in reverse
topological order and accumulates gradients into the leaves. A tape belongs
to a single thread; parallelism is only safe across independent tapes.

All values are 64-bit floats and every public operation checks its output
for NaN/Inf, which is treated as a hard error rather than a value.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erf

__all__ = [
    "NumericsError",
    "Tensor",
    "no_grad",
    "backward",
    "zero_grad",
    "add",
    "sub",
    "mul",
    "matmul",
    "concat",
    "transpose",
    "reshape",
    "take",
    "embedding_lookup",
    "tsum",
    "tmean",
    "tmin",
    "tmax",
    "tabs",
    "relu",
    "gelu",
    "texp",
    "tsqrt",
    "softmax",
    "layernorm",
]

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


class NumericsError(RuntimeError):
    """Raised on shape mismatches and non-finite results."""


def _check_finite(arr: np.ndarray, op: str) -> None:
    if arr.size == 0:
        return
    # Fast path: NaN/Inf anywhere poisons the sum. The full scan only runs
    # to rule out a finite-but-overflowing sum before raising.
    if not np.isfinite(arr.sum()):
        if not np.isfinite(arr).all():
            raise NumericsError(f"non-finite values produced by '{op}'")


_grad_enabled = True


class no_grad:
    """Context manager that disables tape recording (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("array", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, values, requires_grad: bool = False):
        arr = np.asarray(values, dtype=np.float64)
        _check_finite(arr, "tensor")
        self.array = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.array.shape

    @property
    def ndim(self) -> int:
        return self.array.ndim

    @property
    def size(self) -> int:
        return self.array.size

    @property
    def data(self) -> np.ndarray:
        """Row-major flat view of the values."""
        return self.array.reshape(-1)

    def item(self) -> float:
        if self.array.size != 1:
            raise NumericsError(f"item() on tensor of shape {self.shape}")
        return float(self.array.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.array.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar ------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise NumericsError("tensor/tensor division is not supported")
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return _getitem(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes: Sequence[int]):
        return transpose(self, axes)


def _coerce(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _result(arr: np.ndarray, parents: tuple[Tensor, ...], backward_fn, op: str) -> Tensor:
    _check_finite(arr, op)
    out = Tensor.__new__(Tensor)
    out.array = arr
    out.grad = None
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- elementwise arithmetic --------------------------------------------


def _elementwise(a: np.ndarray, b: np.ndarray, op, name: str) -> np.ndarray:
    try:
        return op(a, b)
    except ValueError as exc:
        raise NumericsError(f"{name} shape mismatch: {a.shape} vs {b.shape}") from exc


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    arr = _elementwise(a.array, b.array, np.add, "add")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(arr, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    arr = _elementwise(a.array, b.array, np.subtract, "sub")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(arr, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    arr = _elementwise(a.array, b.array, np.multiply, "mul")

    def bw(g):
        return (
            _unbroadcast(g * b.array, a.shape),
            _unbroadcast(g * a.array, b.shape),
        )

    return _result(arr, (a, b), bw, "mul")


def matmul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.ndim < 2 or b.ndim < 2:
        raise NumericsError("matmul requires operands with at least 2 axes")
    try:
        arr = np.matmul(a.array, b.array)
    except ValueError as exc:
        raise NumericsError(f"matmul shape mismatch: {a.shape} @ {b.shape}") from exc

    def bw(g):
        ga = np.matmul(g, np.swapaxes(b.array, -1, -2))
        gb = np.matmul(np.swapaxes(a.array, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(arr, (a, b), bw, "matmul")


# -- shape manipulation ------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    a = _coerce(a)
    arr = a.array.reshape(shape)

    def bw(g):
        return (g.reshape(a.shape),)

    return _result(arr, (a,), bw, "reshape")


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    a = _coerce(a)
    axes = tuple(axes)
    arr = np.transpose(a.array, axes)
    inv = tuple(np.argsort(axes))

    def bw(g):
        return (np.transpose(g, inv),)

    return _result(arr, (a,), bw, "transpose")


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    parts = [_coerce(t) for t in tensors]
    if not parts:
        raise NumericsError("concat of zero tensors")
    arr = np.concatenate([p.array for p in parts], axis=axis)
    sizes = [p.array.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return _result(arr, tuple(parts), bw, "concat")


def _getitem(a: Tensor, idx) -> Tensor:
    a = _coerce(a)
    arr = a.array[idx]
    if not isinstance(arr, np.ndarray):
        arr = np.asarray(arr)

    def bw(g):
        full = np.zeros_like(a.array)
        np.add.at(full, idx, g)
        return (full,)

    return _result(arr, (a,), bw, "slice")


def take(a: Tensor, indices, axis: int) -> Tensor:
    """Gather rows along ``axis`` with an integer index array."""
    a = _coerce(a)
    idx = np.asarray(indices, dtype=np.intp)
    arr = np.take(a.array, idx, axis=axis)

    def bw(g):
        full = np.zeros_like(a.array)
        sl = [slice(None)] * a.ndim
        sl[axis] = idx
        np.add.at(full, tuple(sl), g)
        return (full,)

    return _result(arr, (a,), bw, "take")


def embedding_lookup(table: Tensor, indices) -> Tensor:
    """table[(indices)] with scatter-add gradient (repeated indices allowed)."""
    return take(table, indices, axis=0)


# -- reductions --------------------------------------------------------


def _restore_axes(g: np.ndarray, shape, axis, keepdims: bool) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g, shape).copy() if np.ndim(g) == 0 else np.full(shape, g)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape).copy()


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _coerce(a)
    arr = a.array.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        return (_restore_axes(g, a.shape, axis, keepdims),)

    return _result(np.asarray(arr), (a,), bw, "sum")


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _coerce(a)
    arr = a.array.mean(axis=axis, keepdims=keepdims)
    count = a.array.size if axis is None else a.array.shape[axis]

    def bw(g):
        return (_restore_axes(g, a.shape, axis, keepdims) / count,)

    return _result(np.asarray(arr), (a,), bw, "mean")


def _min_max(a: Tensor, axis: int, mode: str) -> Tensor:
    a = _coerce(a)
    if mode == "min":
        arr = a.array.min(axis=axis)
        sel = a.array.argmin(axis=axis)  # ties: lowest index
    else:
        arr = a.array.max(axis=axis)
        sel = a.array.argmax(axis=axis)

    def bw(g):
        full = np.zeros_like(a.array)
        grid = np.indices(arr.shape)
        sl = list(grid)
        sl.insert(axis if axis >= 0 else a.ndim + axis, sel)
        full[tuple(sl)] = g
        return (full,)

    return _result(arr, (a,), bw, mode)


def tmin(a: Tensor, axis: int) -> Tensor:
    return _min_max(a, axis, "min")


def tmax(a: Tensor, axis: int) -> Tensor:
    return _min_max(a, axis, "max")


# -- elementwise nonlinearities ----------------------------------------


def tabs(a: Tensor) -> Tensor:
    a = _coerce(a)
    arr = np.abs(a.array)
    sign = np.sign(a.array)  # sign(0) == 0: subgradient choice at the kink

    def bw(g):
        return (g * sign,)

    return _result(arr, (a,), bw, "abs")


def relu(a: Tensor) -> Tensor:
    a = _coerce(a)
    arr = np.maximum(a.array, 0.0)
    mask = (a.array > 0.0).astype(np.float64)

    def bw(g):
        return (g * mask,)

    return _result(arr, (a,), bw, "relu")


def gelu(a: Tensor) -> Tensor:
    a = _coerce(a)
    x = a.array
    phi = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    arr = x * phi

    def bw(g):
        pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
        return (g * (phi + x * pdf),)

    return _result(arr, (a,), bw, "gelu")


def texp(a: Tensor) -> Tensor:
    a = _coerce(a)
    with np.errstate(over="ignore"):
        arr = np.exp(a.array)

    def bw(g):
        return (g * arr,)

    return _result(arr, (a,), bw, "exp")


def tsqrt(a: Tensor) -> Tensor:
    a = _coerce(a)
    arr = np.sqrt(a.array)

    def bw(g):
        return (g * 0.5 / arr,)

    return _result(arr, (a,), bw, "sqrt")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = _coerce(a)
    shifted = a.array - a.array.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    arr = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * arr).sum(axis=axis, keepdims=True)
        return (arr * (g - dot),)

    return _result(arr, (a,), bw, "softmax")


def layernorm(a: Tensor, eps: float = 1e-12) -> Tensor:
    """Normalize over the last axis to zero mean, unit population variance."""
    a = _coerce(a)
    mu = a.array.mean(axis=-1, keepdims=True)
    centered = a.array - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    arr = centered * inv_std

    def bw(g):
        gm = g.mean(axis=-1, keepdims=True)
        gy = (g * arr).mean(axis=-1, keepdims=True)
        return ((g - gm - arr * gy) * inv_std,)

    return _result(arr, (a,), bw, "layernorm")


# -- backward pass -----------------------------------------------------


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every reachable tensor that requires it.

    Gradients accumulate additively, so a leaf used in several places (or in
    several backward calls without an intervening ``zero_grad``) sums all
    contributions.
    """
    if not isinstance(loss, Tensor):
        raise NumericsError("backward expects a Tensor")
    if loss.size != 1:
        raise NumericsError(f"backward on non-scalar tensor of shape {loss.shape}")
    if not loss.requires_grad:
        raise NumericsError("loss does not require grad; tape is empty")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    if loss.grad is None:
        loss.grad = np.ones_like(loss.array)
    else:
        loss.grad = loss.grad + np.ones_like(loss.array)

    for node in reversed(topo):
        if node._backward is None or node.grad is None:
            continue
        grads = node._backward(node.grad)
        for parent, g in zip(node._parents, grads):
            if g is None or not parent.requires_grad:
                continue
            if g.shape != parent.shape:
                g = g.reshape(parent.shape)
            if parent.grad is None:
                parent.grad = g.copy() if g.base is not None else g
            else:
                parent.grad = parent.grad + g


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
