"""Differentiable operations.

Each operation is a ``Function`` with an analytic backward pass and a thin
lowercase wrapper. Shape problems raise ``ShapeMismatchError`` with both
shapes in the message.
"""

from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from clozecheck.exceptions import AllMaskedRowError
from clozecheck.exceptions import ShapeMismatchError
from clozecheck.nn.tensor import Function
from clozecheck.nn.tensor import Tensor
from clozecheck.nn.tensor import broadcast_shape
from clozecheck.nn.tensor import unbroadcast


class Add(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        broadcast_shape("add", a.shape, b.shape)
        return a + b

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.parents
        return unbroadcast(grad, a.shape), unbroadcast(grad, b.shape)


class Sub(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        broadcast_shape("sub", a.shape, b.shape)
        return a - b

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.parents
        return unbroadcast(grad, a.shape), unbroadcast(-grad, b.shape)


class Mul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        broadcast_shape("mul", a.shape, b.shape)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(grad * self.b, self.a.shape), unbroadcast(grad * self.a, self.b.shape)


class MatMul(Function):
    """Batched matrix product over the last two axes with broadcast batch axes."""

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise ShapeMismatchError("matmul", a.shape, b.shape)
        broadcast_shape("matmul", a.shape[:-2], b.shape[:-2])
        self.a, self.b = a, b
        return a @ b

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ga = grad @ np.swapaxes(self.b, -1, -2)
        gb = np.swapaxes(self.a, -1, -2) @ grad
        return unbroadcast(ga, self.a.shape), unbroadcast(gb, self.b.shape)


class Sum(Function):
    def forward(
        self, x: np.ndarray, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
    ) -> np.ndarray:
        self.shape = x.shape
        self.axis = axis
        self.keepdims = keepdims
        return np.asarray(x.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.shape).copy(),)


class Reshape(Function):
    def forward(self, x: np.ndarray, shape: tuple[int, ...] = ()) -> np.ndarray:
        self.shape = x.shape
        try:
            return x.reshape(shape)
        except ValueError:
            raise ShapeMismatchError("reshape", x.shape, tuple(shape)) from None

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad.reshape(self.shape),)


class Transpose(Function):
    def forward(self, x: np.ndarray, axes: tuple[int, ...] = ()) -> np.ndarray:
        axes = tuple(axes) or tuple(reversed(range(x.ndim)))
        if sorted(axes) != list(range(x.ndim)):
            raise ShapeMismatchError("transpose", x.shape, axes)
        self.inverse = tuple(np.argsort(axes))
        return x.transpose(axes)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad.transpose(self.inverse),)


class ReLU(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.positive = x > 0
        return np.where(self.positive, x, 0).astype(x.dtype)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad * self.positive,)


class MaskedSoftmax(Function):
    """Softmax over the last axis after adding a {0, -inf} mask.

    With ``allow_empty_rows`` a fully masked row yields zeros instead of
    raising.
    """

    def forward(
        self, x: np.ndarray, mask: np.ndarray | None = None, allow_empty_rows: bool = False
    ) -> np.ndarray:
        if mask is None:
            keep = np.ones(x.shape, dtype=bool)
        else:
            if broadcast_shape("masked_softmax", x.shape, mask.shape) != x.shape:
                raise ShapeMismatchError("masked_softmax", x.shape, mask.shape)
            keep = np.broadcast_to(np.isfinite(mask), x.shape)

        empty = ~keep.any(axis=-1, keepdims=True)
        if empty.any() and not allow_empty_rows:
            msg = f"masked_softmax: {int(empty.sum())} row(s) have every entry masked"
            raise AllMaskedRowError(msg)

        shifted = np.where(keep, x, -np.inf)
        peak = np.where(empty, 0.0, shifted.max(axis=-1, keepdims=True))
        e = np.where(keep, np.exp(np.where(keep, x, 0.0) - peak), 0.0)
        total = e.sum(axis=-1, keepdims=True)
        self.p = (e / np.where(total > 0, total, 1.0)).astype(x.dtype)
        return self.p

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        p = self.p
        return (p * (grad - (grad * p).sum(axis=-1, keepdims=True)),)


class LogSoftmax(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        shifted = x - x.max(axis=-1, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        self.p = np.exp(out)
        return out

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad - self.p * grad.sum(axis=-1, keepdims=True),)


class LayerNorm(Function):
    """Normalization over the last axis with elementwise gain and bias."""

    def forward(
        self, x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5
    ) -> np.ndarray:
        if gamma.shape != x.shape[-1:] or beta.shape != x.shape[-1:]:
            raise ShapeMismatchError("layer_norm", x.shape, gamma.shape)
        mu = x.mean(axis=-1, keepdims=True)
        self.inv_std = 1.0 / np.sqrt(x.var(axis=-1, keepdims=True) + eps)
        self.xhat = (x - mu) * self.inv_std
        self.gamma = gamma
        return self.xhat * gamma + beta

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.xhat.shape[-1]
        dxhat = grad * self.gamma
        dx = (
            self.inv_std
            / n
            * (
                n * dxhat
                - dxhat.sum(axis=-1, keepdims=True)
                - self.xhat * (dxhat * self.xhat).sum(axis=-1, keepdims=True)
            )
        )
        lead = tuple(range(grad.ndim - 1))
        return dx, (grad * self.xhat).sum(axis=lead), grad.sum(axis=lead)


class Dropout(Function):
    """Inverted dropout with a mask drawn from the given generator."""

    def forward(self, x: np.ndarray, p: float = 0.0, rng: Any = None) -> np.ndarray:
        keep = 1.0 - p
        self.mask = (rng.random(x.shape) < keep).astype(x.dtype) / keep
        return x * self.mask

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad * self.mask,)


class Embed(Function):
    """Row lookup ``weight[ids]``."""

    def forward(self, weight: np.ndarray, ids: Any = None) -> np.ndarray:
        ids = np.asarray(ids)
        if ids.size and (ids.min() < 0 or ids.max() >= weight.shape[0]):
            raise ShapeMismatchError("embed", weight.shape, (int(ids.min()), int(ids.max())))
        self.ids = ids
        self.rows = weight.shape[0]
        return weight[ids]

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        dw = np.zeros((self.rows, grad.shape[-1]), dtype=grad.dtype)
        np.add.at(dw, self.ids.reshape(-1), grad.reshape(-1, grad.shape[-1]))
        return (dw,)


class Conv2d(Function):
    """Stride-1 convolution of ``[B, C, H, W]`` with ``[O, C, kh, kw]`` plus bias ``[O]``.

    Windows come from ``sliding_window_view`` over the zero-padded input.
    """

    def forward(
        self, x: np.ndarray, w: np.ndarray, b: np.ndarray, padding: int = 0
    ) -> np.ndarray:
        if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1] or b.shape != (w.shape[0],):
            raise ShapeMismatchError("conv2d", x.shape, w.shape)
        self.padding = padding
        self.x_shape = x.shape
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        if xp.shape[2] < w.shape[2] or xp.shape[3] < w.shape[3]:
            raise ShapeMismatchError("conv2d", x.shape, w.shape)
        self.windows = sliding_window_view(xp, w.shape[2:], axis=(2, 3))
        self.w = w
        out = np.einsum("bchwij,ocij->bohw", self.windows, w, optimize=True)
        return out + b[None, :, None, None]

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        dw = np.einsum("bchwij,bohw->ocij", self.windows, grad, optimize=True)
        db = grad.sum(axis=(0, 2, 3))
        dcols = np.einsum("bohw,ocij->bchwij", grad, self.w, optimize=True)

        p = self.padding
        b, c, h, w = self.x_shape
        dxp = np.zeros((b, c, h + 2 * p, w + 2 * p), dtype=grad.dtype)
        out_h, out_w = grad.shape[2:]
        kh, kw = self.w.shape[2:]
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i : i + out_h, j : j + out_w] += dcols[..., i, j]
        return dxp[:, :, p : p + h, p : p + w], dw, db


class MaxPool2d(Function):
    """Non-overlapping max pooling with window ``(kh, kw)`` over ``[B, C, H, W]``."""

    def forward(self, x: np.ndarray, kernel: tuple[int, int] = (2, 2)) -> np.ndarray:
        kh, kw = kernel
        b, c, h, w = x.shape
        if h % kh or w % kw:
            raise ShapeMismatchError("maxpool2d", x.shape, (kh, kw))
        self.x_shape = x.shape
        self.kernel = (kh, kw)
        blocks = x.reshape(b, c, h // kh, kh, w // kw, kw).transpose(0, 1, 2, 4, 3, 5)
        blocks = blocks.reshape(b, c, h // kh, w // kw, kh * kw)
        self.argmax = blocks.argmax(axis=-1)
        return np.take_along_axis(blocks, self.argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        b, c, h, w = self.x_shape
        kh, kw = self.kernel
        blocks = np.zeros((b, c, h // kh, w // kw, kh * kw), dtype=grad.dtype)
        np.put_along_axis(blocks, self.argmax[..., None], grad[..., None], axis=-1)
        blocks = blocks.reshape(b, c, h // kh, w // kw, kh, kw).transpose(0, 1, 2, 4, 3, 5)
        return (blocks.reshape(b, c, h, w),)


class MaskedNLL(Function):
    """Mean negative log-likelihood over positions whose target is not ``ignore``."""

    def forward(self, log_probs: np.ndarray, targets: Any = None, ignore: int = -1) -> np.ndarray:
        targets = np.asarray(targets)
        if targets.shape != log_probs.shape[:-1]:
            raise ShapeMismatchError("masked_nll", log_probs.shape, targets.shape)
        self.valid = targets != ignore
        self.count = max(1, int(self.valid.sum()))
        self.safe = np.where(self.valid, targets, 0)
        self.shape = log_probs.shape
        picked = np.take_along_axis(log_probs, self.safe[..., None], axis=-1)[..., 0]
        return np.asarray(-(picked * self.valid).sum() / self.count, dtype=log_probs.dtype)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        out = np.zeros(self.shape, dtype=grad.dtype)
        np.put_along_axis(
            out, self.safe[..., None], (-self.valid.astype(grad.dtype) / self.count)[..., None], axis=-1
        )
        return (out * grad,)


def add(a: Tensor, b: Tensor) -> Tensor:
    return Add.apply(a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return Sub.apply(a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return Mul.apply(a, b)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


def sum(x: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = x.data.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([x.shape[a] for a in axes]))
    return Sum.apply(x, axis=axis, keepdims=keepdims) * (1.0 / count)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def transpose(x: Tensor, axes: tuple[int, ...] = ()) -> Tensor:
    return Transpose.apply(x, axes=tuple(axes))


def relu(x: Tensor) -> Tensor:
    return ReLU.apply(x)


def masked_softmax(
    x: Tensor, mask: np.ndarray | None = None, allow_empty_rows: bool = False
) -> Tensor:
    """Softmax over the last axis; ``mask`` is additive with entries in {0, -inf}.

    Masked entries come out exactly 0 and every row sums to 1 over its
    unmasked entries.

    Raises:
        AllMaskedRowError: If a row is fully masked and ``allow_empty_rows``
            is False.
        ShapeMismatchError: If ``mask`` does not broadcast to ``x``.
    """
    return MaskedSoftmax.apply(x, mask=mask, allow_empty_rows=allow_empty_rows)


def softmax(x: Tensor) -> Tensor:
    return MaskedSoftmax.apply(x)


def log_softmax(x: Tensor) -> Tensor:
    return LogSoftmax.apply(x)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    return LayerNorm.apply(x, gamma, beta, eps=eps)


def dropout(x: Tensor, p: float, rng: np.random.Generator, training: bool = True) -> Tensor:
    """Inverted dropout; the identity in evaluation mode or with ``p == 0``."""
    if not training or p <= 0.0:
        return x
    return Dropout.apply(x, p=p, rng=rng)


def embed(weight: Tensor, ids: np.ndarray) -> Tensor:
    return Embed.apply(weight, ids=ids)


def conv2d(x: Tensor, w: Tensor, b: Tensor, padding: int = 0) -> Tensor:
    return Conv2d.apply(x, w, b, padding=padding)


def maxpool2d(x: Tensor, kernel: tuple[int, int]) -> Tensor:
    return MaxPool2d.apply(x, kernel=tuple(kernel))


def masked_nll(log_probs: Tensor, targets: np.ndarray, ignore: int = -1) -> Tensor:
    return MaskedNLL.apply(log_probs, targets=targets, ignore=ignore)
