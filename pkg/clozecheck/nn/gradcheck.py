"""Central finite-difference checks for analytic gradients."""

from collections.abc import Callable
from collections.abc import Sequence

import numpy as np

from clozecheck.nn.tensor import Tensor


def numeric_grad(fn: Callable[[], Tensor], x: Tensor, eps: float = 1e-3) -> np.ndarray:
    """Central differences of the scalar ``fn()`` with respect to ``x.data``."""
    x.data = np.ascontiguousarray(x.data)
    grad = np.zeros_like(x.data, dtype=np.float64)
    flat = x.data.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        upper = float(fn().data)
        flat[i] = original - eps
        lower = float(fn().data)
        flat[i] = original
        grad.reshape(-1)[i] = (upper - lower) / (2 * eps)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``max |analytic - numeric| / max(1, |numeric|)`` over all elements."""
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))))


def gradcheck(
    fn: Callable[[], Tensor], inputs: Sequence[Tensor], eps: float = 1e-3
) -> dict[int, float]:
    """Compare backward against finite differences for every tensor in ``inputs``.

    ``fn`` must rebuild the graph from the current ``inputs`` on each call
    and return a scalar. Run it under ``default_dtype(np.float64)``.

    Returns:
        Maximum relative error per input index.
    """
    for x in inputs:
        x.zero_grad()
    fn().backward()
    analytic = [
        np.zeros_like(x.data) if x.grad is None else x.grad.copy() for x in inputs
    ]
    return {
        i: max_relative_error(analytic[i], numeric_grad(fn, x, eps))
        for i, x in enumerate(inputs)
    }
