"""CTC loss (log-space forward-backward) and best-path decoding."""

from collections.abc import Sequence
from typing import Any

import numpy as np

from clozecheck.exceptions import LengthMismatchError
from clozecheck.exceptions import ShapeMismatchError
from clozecheck.exceptions import TargetTooLongError
from clozecheck.nn.tensor import Function
from clozecheck.nn.tensor import Tensor


NEG_INF = -np.inf


def required_frames(target: Sequence[int]) -> int:
    """Fewest frames that can emit ``target``: its length plus one blank per repeat."""
    repeats = sum(1 for a, b in zip(target, target[1:], strict=False) if a == b)
    return len(target) + repeats


def extend_with_blanks(target: Sequence[int], blank: int) -> np.ndarray:
    ext = np.full(2 * len(target) + 1, blank, dtype=np.int64)
    ext[1::2] = target
    return ext


def ctc_forward_backward(
    log_probs: np.ndarray, target: Sequence[int], blank: int
) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of ``target`` and its gradient w.r.t. ``log_probs``.

    ``alpha[t, s]`` includes the emission at ``t``, ``beta[t, s]`` excludes
    it, so ``sum_s alpha[t, s] * beta[t, s]`` is the total probability for
    every ``t`` and the gradient is ``-sum_{s: ext[s] = k} alpha * beta / p``.

    Args:
        log_probs: ``[T, C]`` log-softmax rows.
        target: Label ids without blanks.
        blank: Blank id.

    Raises:
        TargetTooLongError: If ``T`` frames cannot emit ``target``.
    """
    lp = np.asarray(log_probs, dtype=np.float64)
    frames = lp.shape[0]
    needed = required_frames(target)
    if frames < max(needed, 1):
        raise TargetTooLongError(len(target), needed, frames)

    ext = extend_with_blanks(target, blank)
    states = len(ext)
    skip = np.zeros(states, dtype=bool)
    skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    emit = lp[:, ext]

    alpha = np.full((frames, states), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if states > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, frames):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(prev[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha[t] = acc + emit[t]

    beta = np.full((frames, states), NEG_INF)
    beta[-1, -1] = 0.0
    if states > 1:
        beta[-1, -2] = 0.0
    for t in range(frames - 2, -1, -1):
        nxt = beta[t + 1] + emit[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(nxt[:-1], nxt[1:])
        acc[:-2] = np.where(skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc

    log_p = np.logaddexp.reduce(alpha[-1, -2:]) if states > 1 else alpha[-1, -1]
    if not np.isfinite(log_p):
        raise TargetTooLongError(len(target), needed, frames)

    occupancy = np.exp(alpha + beta - log_p)
    grad = np.zeros_like(lp)
    for s, k in enumerate(ext):
        grad[:, k] -= occupancy[:, s]
    return float(-log_p), grad


class CtcLoss(Function):
    """Mean CTC loss over a batch of ``[B, T, C]`` log-probabilities."""

    def forward(
        self,
        log_probs: np.ndarray,
        targets: Any = None,
        input_lengths: Any = None,
        blank: int = 0,
    ) -> np.ndarray:
        batch, frames, _ = log_probs.shape
        lengths = np.full(batch, frames) if input_lengths is None else np.asarray(input_lengths)
        if len(targets) != batch or lengths.shape != (batch,):
            raise ShapeMismatchError("ctc_loss", log_probs.shape, (len(targets), *lengths.shape))

        self.grad = np.zeros(log_probs.shape, dtype=np.float64)
        total = 0.0
        for b in range(batch):
            t_b = int(lengths[b])
            loss, grad = ctc_forward_backward(log_probs[b, :t_b], targets[b], blank)
            total += loss
            self.grad[b, :t_b] = grad
        self.grad /= batch
        return np.asarray(total / batch, dtype=log_probs.dtype)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (self.grad * grad,)


def ctc_loss(
    log_probs: Tensor,
    targets: Sequence[Sequence[int]] | Sequence[int],
    blank: int,
    input_lengths: np.ndarray | None = None,
) -> Tensor:
    """CTC negative log-likelihood.

    Accepts a single ``[T, C]`` sequence with one target, or a ``[B, T, C]``
    batch with one target per row (mean over the batch). Frames at or past
    ``input_lengths[b]`` are ignored.

    Raises:
        TargetTooLongError: If a target needs more frames than available.
    """
    if log_probs.ndim == 2:
        return CtcLoss.apply(
            log_probs.reshape(1, *log_probs.shape), targets=[list(targets)], blank=blank
        )
    return CtcLoss.apply(log_probs, targets=targets, input_lengths=input_lengths, blank=blank)


def greedy_decode(log_probs: np.ndarray, blank: int, length: int | None = None) -> list[int]:
    """Best path: per-frame argmax, collapse repeats, drop blanks.

    Example:
        >>> import numpy as np
        >>> greedy_decode(np.log(np.eye(3)[[0, 0, 2, 1]] + 1e-9), blank=2)
        [0, 1]
    """
    best = np.asarray(log_probs)[:length].argmax(axis=-1)
    out: list[int] = []
    previous = -1
    for k in best.tolist():
        if k != previous and k != blank:
            out.append(k)
        previous = k
    return out


def batch_greedy_decode(
    log_probs: np.ndarray, blank: int, lengths: Sequence[int]
) -> list[list[int]]:
    if len(lengths) != log_probs.shape[0]:
        msg = f"{len(lengths)} lengths for a batch of {log_probs.shape[0]}"
        raise LengthMismatchError(msg)
    return [greedy_decode(log_probs[b], blank, int(n)) for b, n in enumerate(lengths)]
