"""Dense tensor with reverse-mode differentiation over numpy arrays.

Every differentiable operation is a ``Function`` subclass. ``Function.apply``
runs the forward pass on raw arrays and, when gradients are wanted, records
the function as the context of its output; ``Tensor.backward`` walks those
contexts in reverse topological order. The graph is rebuilt on every
forward pass.
"""

from __future__ import annotations

import threading
from collections.abc import Iterator
from contextlib import contextmanager
from typing import Any

import numpy as np

from clozecheck.exceptions import ShapeMismatchError


_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


def get_default_dtype() -> np.dtype:
    return getattr(_state, "dtype", np.dtype(np.float32))


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording in the current thread."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


@contextmanager
def default_dtype(dtype: Any) -> Iterator[None]:
    """Create new tensors with ``dtype`` in the current thread (float64 for grad checks)."""
    previous = get_default_dtype()
    _state.dtype = np.dtype(dtype)
    try:
        yield
    finally:
        _state.dtype = previous


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def broadcast_shape(op: str, a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    """Result shape of broadcasting ``a`` with ``b``.

    Raises:
        ShapeMismatchError: If the shapes do not broadcast.
    """
    try:
        return tuple(np.broadcast_shapes(a, b))
    except ValueError:
        raise ShapeMismatchError(op, a, b) from None


class Tensor:
    """Float array plus an optional gradient and the function that produced it.

    Attributes:
        data: Values, in the default dtype at creation time.
        grad: Accumulated gradient with the shape of ``data``, or None.
        requires_grad: Whether backward should reach this tensor.
        ctx: Producing function, None for leaves.
    """

    def __init__(
        self, data: Any, requires_grad: bool = False, ctx: Function | None = None
    ) -> None:
        array = np.asarray(data)
        if array.dtype != get_default_dtype():
            array = array.astype(get_default_dtype())
        self.data: np.ndarray = array
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.ctx = ctx

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    @staticmethod
    def wrap(x: Tensor | float | np.ndarray) -> Tensor:
        return x if isinstance(x, Tensor) else Tensor(x)

    def __add__(self, other: Tensor | float) -> Tensor:
        from clozecheck.nn import functional as F

        return F.add(self, Tensor.wrap(other))

    def __radd__(self, other: float) -> Tensor:
        return self.__add__(other)

    def __sub__(self, other: Tensor | float) -> Tensor:
        from clozecheck.nn import functional as F

        return F.sub(self, Tensor.wrap(other))

    def __rsub__(self, other: float) -> Tensor:
        from clozecheck.nn import functional as F

        return F.sub(Tensor.wrap(other), self)

    def __mul__(self, other: Tensor | float) -> Tensor:
        from clozecheck.nn import functional as F

        return F.mul(self, Tensor.wrap(other))

    def __rmul__(self, other: float) -> Tensor:
        return self.__mul__(other)

    def __neg__(self) -> Tensor:
        return self * -1.0

    def __matmul__(self, other: Tensor) -> Tensor:
        from clozecheck.nn import functional as F

        return F.matmul(self, other)

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        from clozecheck.nn import functional as F

        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        from clozecheck.nn import functional as F

        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> Tensor:
        from clozecheck.nn import functional as F

        return F.reshape(self, shape)

    def transpose(self, *axes: int) -> Tensor:
        from clozecheck.nn import functional as F

        return F.transpose(self, axes)

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate gradients of this tensor into every reachable tensor.

        ``grad`` defaults to ones, so calling it on a scalar loss gives
        d(loss)/d(x) in ``x.grad``.
        """
        if grad is None:
            grad = np.ones_like(self.data)
        self.grad = grad if self.grad is None else self.grad + grad

        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node.ctx is not None:
                for parent in node.ctx.parents:
                    if parent.ctx is not None and id(parent) not in visited:
                        stack.append((parent, False))

        for node in reversed(order):
            ctx = node.ctx
            if ctx is None or node.grad is None:
                continue
            grads = ctx.backward(node.grad)
            for parent, g in zip(ctx.parents, grads, strict=True):
                if g is None or not parent.requires_grad:
                    continue
                g = g.astype(parent.data.dtype, copy=False)
                parent.grad = g if parent.grad is None else parent.grad + g
            if node is not self:
                # intermediate grads are not needed once propagated
                node.grad = None


class Function:
    """One differentiable operation; subclasses implement forward and backward.

    ``forward`` receives the parents' raw arrays plus keyword options and
    returns the output array. ``backward`` receives the output gradient and
    returns one gradient (or None) per parent.
    """

    def __init__(self, *parents: Tensor) -> None:
        self.parents = parents

    @classmethod
    def apply(cls, *parents: Tensor, **options: Any) -> Tensor:
        ctx = cls(*parents)
        out = ctx.forward(*[p.data for p in parents], **options)
        track = is_grad_enabled() and any(p.requires_grad for p in parents)
        return Tensor(out, requires_grad=track, ctx=ctx if track else None)

    def forward(self, *args: np.ndarray, **options: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        raise NotImplementedError
