"""AdamW with decoupled weight decay and the cosine learning-rate schedule."""

import math
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field

import numpy as np

from clozecheck.exceptions import MissingGradError
from clozecheck.nn.layers import Parameter


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


def adamw_step(
    param: Parameter,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """Update ``param`` in place.

    The decay multiplies the weights directly and never enters the moment
    estimates.
    """
    beta1, beta2 = betas
    state.step += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1**state.step)
    v_hat = state.v / (1.0 - beta2**state.step)
    if weight_decay:
        param.data = param.data * (1.0 - lr * weight_decay)
    param.data = (param.data - lr * m_hat / (np.sqrt(v_hat) + eps)).astype(param.data.dtype)


@dataclass
class AdamW:
    """AdamW over named parameters; frozen ones are skipped entirely.

    Attributes:
        params: ``(name, parameter)`` pairs to optimize.
        lr: Learning rate used when ``step`` gets none.
    """

    params: Sequence[tuple[str, Parameter]]
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    state: dict[str, AdamState] = field(default_factory=dict)

    def step(self, lr: float | None = None) -> None:
        """Apply one update to every non-frozen parameter.

        Raises:
            MissingGradError: If a non-frozen parameter has no gradient.
        """
        lr = self.lr if lr is None else lr
        for name, p in self.params:
            if p.frozen:
                continue
            if p.grad is None:
                raise MissingGradError(name)
            state = self.state.get(name)
            if state is None:
                state = AdamState(np.zeros_like(p.data), np.zeros_like(p.data))
                self.state[name] = state
            adamw_step(p, p.grad, state, lr, self.betas, self.eps, self.weight_decay)

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.zero_grad()


def cosine_anneal(step: int, total_steps: int, lr_max: float) -> float:
    """``0.5 * lr_max * (1 + cos(pi * step / total_steps))``.

    Example:
        >>> cosine_anneal(0, 10, 1e-3)
        0.001
        >>> cosine_anneal(5, 10, 1e-3)
        0.0005
    """
    if total_steps <= 0:
        return lr_max
    step = min(max(step, 0), total_steps)
    return 0.5 * lr_max * (1.0 + math.cos(math.pi * step / total_steps))
