"""Reverse-mode automatic differentiation over numpy arrays.

Ops build a define-by-run graph: each result records its parent tensors and one
vector-Jacobian closure per parent. ``tape`` linearizes the graph reachable
from an output into topological order; ``backward`` walks that tape in reverse,
accumulating gradients additively (so a tensor used twice gets both
contributions). Every op checks its result for NaN/Inf and fails loudly,
naming the op, instead of letting poison propagate.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..errors import NumericsError, ShapeError

Array = np.ndarray
TensorLike = Union["Tensor", Array, float, int]


class Tensor:
    """One node of the recorded computation graph.

    ``values`` is a float64 array written by the op that produced the node.
    Leaf values may be updated in place between tapes (the optimizer does),
    but never while a tape that read them is still to be replayed.
    """

    __slots__ = ("values", "parents", "vjps", "op", "grad")

    def __init__(
        self,
        values,
        parents: Sequence["Tensor"] = (),
        vjps: Sequence[Callable[[Array], Array]] = (),
        op: str = "leaf",
    ):
        arr = np.asarray(values, dtype=np.float64)
        # NaN/Inf both poison a sum, so one reduction screens the whole array.
        # A finite array can only trip this by overflowing the sum itself,
        # which needs magnitudes near 1e308; raising on that is fine too.
        if not np.isfinite(arr.sum()):
            raise NumericsError(f"{op} produced non-finite values")
        self.values = arr
        self.parents = parents if type(parents) is tuple else tuple(parents)
        self.vjps = vjps if type(vjps) is tuple else tuple(vjps)
        self.op = op
        self.grad: Optional[Array] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.values.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(op={self.op!r}, shape={self.shape})"

    # Arithmetic sugar; non-tensors are wrapped as constants.
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __neg__(self):
        return neg(self)


def _wrap(x: TensorLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum a broadcast gradient back down to ``shape``."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.values + b.values
    return Tensor(
        out,
        (a, b),
        (
            lambda g: _unbroadcast(g, a.values.shape),
            lambda g: _unbroadcast(g, b.values.shape),
        ),
        op="add",
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.values - b.values
    return Tensor(
        out,
        (a, b),
        (
            lambda g: _unbroadcast(g, a.values.shape),
            lambda g: _unbroadcast(-g, b.values.shape),
        ),
        op="sub",
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.values * b.values
    return Tensor(
        out,
        (a, b),
        (
            lambda g: _unbroadcast(g * b.values, a.values.shape),
            lambda g: _unbroadcast(g * a.values, b.values.shape),
        ),
        op="mul",
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    out = a.values / b.values
    return Tensor(
        out,
        (a, b),
        (
            lambda g: _unbroadcast(g / b.values, a.values.shape),
            lambda g: _unbroadcast(-g * a.values / (b.values * b.values), b.values.shape),
        ),
        op="div",
    )


def neg(a: Tensor) -> Tensor:
    return Tensor(-a.values, (a,), (lambda g: -g,), op="neg")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for the 2D@2D, 1D@2D, 2D@1D, and 1D@1D cases."""
    av, bv = a.values, b.values
    if av.ndim not in (1, 2) or bv.ndim not in (1, 2):
        raise ShapeError(f"matmul supports 1-D and 2-D operands, got {av.ndim}-D @ {bv.ndim}-D")
    inner_a = av.shape[-1]
    inner_b = bv.shape[0]
    if inner_a != inner_b:
        raise ShapeError(f"matmul inner dimensions differ: {av.shape} @ {bv.shape}")
    out = np.matmul(av, bv)

    if av.ndim == 2 and bv.ndim == 2:
        vjp_a = lambda g: np.matmul(g, bv.T)
        vjp_b = lambda g: np.matmul(av.T, g)
    elif av.ndim == 1 and bv.ndim == 2:
        vjp_a = lambda g: np.matmul(bv, g)
        vjp_b = lambda g: np.outer(av, g)
    elif av.ndim == 2 and bv.ndim == 1:
        vjp_a = lambda g: np.outer(g, bv)
        vjp_b = lambda g: np.matmul(av.T, g)
    else:  # 1-D @ 1-D dot product
        vjp_a = lambda g: g * bv
        vjp_b = lambda g: g * av
    return Tensor(out, (a, b), (vjp_a, vjp_b), op="matmul")


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose expects a 2-D tensor, got shape {a.shape}")
    return Tensor(a.values.T, (a,), (lambda g: g.T,), op="transpose")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    original = a.values.shape
    try:
        out = a.values.reshape(tuple(shape))
    except ValueError:
        raise ShapeError(f"cannot reshape {original} to {tuple(shape)}") from None
    return Tensor(out, (a,), (lambda g: g.reshape(original),), op="reshape")


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ShapeError("concat needs at least one tensor")
    try:
        out = np.concatenate([p.values for p in parts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from None
    sizes = [p.values.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def make_vjp(i: int):
        lo, hi = offsets[i], offsets[i + 1]
        def vjp(g: Array) -> Array:
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            return g[tuple(index)]
        return vjp

    return Tensor(out, tuple(parts), tuple(make_vjp(i) for i in range(len(parts))), op="concat")


def slice_rows(a: Tensor, indices) -> Tensor:
    """Gather along axis 0. Duplicate indices accumulate gradient additively."""
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError(f"slice_rows expects a flat index list, got shape {idx.shape}")
    n = a.values.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ShapeError(f"slice_rows index out of range for axis of length {n}")
    out = a.values[idx]

    def vjp(g: Array) -> Array:
        full = np.zeros_like(a.values)
        np.add.at(full, idx, g)
        return full

    return Tensor(out, (a,), (vjp,), op="slice_rows")


def sigmoid(a: Tensor) -> Tensor:
    v = a.values
    e = np.exp(-np.abs(v))
    out = np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return Tensor(out, (a,), (lambda g: g * out * (1.0 - out),), op="sigmoid")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.values)
    return Tensor(out, (a,), (lambda g: g * (1.0 - out * out),), op="tanh")


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    v = a.values
    out = np.where(v > 0, v, slope * v)
    return Tensor(out, (a,), (lambda g: g * np.where(v > 0, 1.0, slope),), op="leaky_relu")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.values)
    return Tensor(out, (a,), (lambda g: g * out,), op="exp")


def log(a: Tensor) -> Tensor:
    out = np.log(a.values)
    return Tensor(out, (a,), (lambda g: g / a.values,), op="log")


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    v = a.values
    out = np.clip(v, lo, hi)
    mask = (v >= lo) & (v <= hi)
    return Tensor(out, (a,), (lambda g: g * mask,), op="clip")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    v = a.values
    shifted = v - v.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g: Array) -> Array:
        dot = (g * out).sum(axis=axis, keepdims=True)
        return out * (g - dot)

    return Tensor(out, (a,), (vjp,), op="softmax")


def sum(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = a.values.sum(axis=axis, keepdims=keepdims)

    def vjp(g: Array) -> Array:
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, a.values.shape).copy()

    return Tensor(out, (a,), (vjp,), op="sum")


def mean(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    out = a.values.mean(axis=axis, keepdims=keepdims)
    count = a.values.size if axis is None else a.values.shape[axis]

    def vjp(g: Array) -> Array:
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, a.values.shape).copy() / count

    return Tensor(out, (a,), (vjp,), op="mean")


def tape(output: Tensor) -> list[Tensor]:
    """Topologically ordered record of the graph below ``output``.

    Parents always precede the nodes they feed; ``output`` is last. Iterative
    so arbitrarily deep graphs cannot hit the recursion limit.
    """
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(output, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(
    output: Tensor, wrt: Optional[Sequence[Tensor]] = None
) -> Optional[list[Array]]:
    """Accumulate gradients of a scalar ``output`` through the recorded tape.

    Sets ``.grad`` on every tensor in the tape. With ``wrt``, also returns the
    gradient for each requested tensor (zeros if it never fed the output).
    Each tape node is visited exactly once.
    """
    if output.values.size != 1:
        raise ShapeError(f"backward needs a scalar output, got shape {output.shape}")
    order = tape(output)
    grads: dict[int, Array] = {id(output): np.ones_like(output.values)}
    for node in reversed(order):
        g = grads.get(id(node))
        node.grad = g
        if g is None:
            continue
        for parent, vjp in zip(node.parents, node.vjps):
            contribution = vjp(g)
            seen = grads.get(id(parent))
            grads[id(parent)] = contribution if seen is None else seen + contribution
    if wrt is None:
        return None
    return [grads.get(id(t), np.zeros_like(t.values)) for t in wrt]
