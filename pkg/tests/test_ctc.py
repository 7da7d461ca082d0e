"""Tests for CTC loss and greedy decoding."""

import itertools

import numpy as np
import pytest

from clozecheck.exceptions import LengthMismatchError
from clozecheck.exceptions import TargetTooLongError
from clozecheck.models.ctc import batch_greedy_decode
from clozecheck.models.ctc import ctc_forward_backward
from clozecheck.models.ctc import ctc_loss
from clozecheck.models.ctc import greedy_decode
from clozecheck.models.ctc import required_frames
from clozecheck.nn import functional as F
from clozecheck.nn.gradcheck import gradcheck
from clozecheck.nn.gradcheck import max_relative_error
from clozecheck.nn.tensor import Tensor
from clozecheck.nn.tensor import default_dtype


def random_log_probs(rng: np.random.Generator, frames: int, classes: int) -> np.ndarray:
    logits = rng.normal(size=(frames, classes))
    return logits - np.logaddexp.reduce(logits, axis=1, keepdims=True)


def collapse(path: tuple[int, ...], blank: int) -> list[int]:
    out: list[int] = []
    previous = -1
    for k in path:
        if k != previous and k != blank:
            out.append(k)
        previous = k
    return out


def brute_force_loss(log_probs: np.ndarray, target: list[int], blank: int) -> float:
    """``-log`` of the summed probability of every path collapsing to ``target``."""
    frames, classes = log_probs.shape
    total = -np.inf
    for path in itertools.product(range(classes), repeat=frames):
        if collapse(path, blank) == target:
            total = np.logaddexp(total, sum(log_probs[t, k] for t, k in enumerate(path)))
    return float(-total)


def small_cases():
    for frames in range(1, 5):
        for classes in (2, 3):
            blank = classes - 1
            labels = range(classes - 1)
            for length in range(3):
                for target in itertools.product(labels, repeat=length):
                    if required_frames(target) <= frames:
                        yield frames, classes, blank, list(target)


def test_loss_matches_brute_force():
    """Test the forward pass against explicit path enumeration."""
    rng = np.random.default_rng(0)
    for frames, classes, blank, target in small_cases():
        lp = random_log_probs(rng, frames, classes)
        loss, _ = ctc_forward_backward(lp, target, blank)
        assert abs(loss - brute_force_loss(lp, target, blank)) < 1e-9, (frames, classes, target)


def test_gradient_matches_finite_differences():
    """Test the analytic gradient w.r.t. log-probabilities."""
    rng = np.random.default_rng(1)
    lp = random_log_probs(rng, 5, 4)
    target = [0, 2, 2]
    _, grad = ctc_forward_backward(lp, target, blank=3)
    numeric = np.zeros_like(lp)
    eps = 1e-6
    for idx in np.ndindex(*lp.shape):
        up, down = lp.copy(), lp.copy()
        up[idx] += eps
        down[idx] -= eps
        numeric[idx] = (
            ctc_forward_backward(up, target, 3)[0] - ctc_forward_backward(down, target, 3)[0]
        ) / (2 * eps)
    assert max_relative_error(grad, numeric) < 1e-4


def test_loss_gradcheck_through_log_softmax():
    """Test the batched loss as part of a larger graph."""
    rng = np.random.default_rng(2)
    with default_dtype(np.float64):
        logits = Tensor(rng.normal(size=(2, 6, 4)), requires_grad=True)
        targets = [[0, 1], [2, 2, 1]]
        errors = gradcheck(lambda: ctc_loss(F.log_softmax(logits), targets, blank=3), [logits], eps=1e-6)
    assert errors[0] < 1e-4


def test_single_frame_certain_emission():
    """Test that a certain one-frame emission costs nothing."""
    lp = np.log(np.array([[1e-12, 1.0, 1e-12]]))
    loss, _ = ctc_forward_backward(lp, [1], blank=2)
    assert loss == pytest.approx(0.0, abs=1e-9)


def test_empty_target_is_all_blanks():
    """Test that the empty target scores the all-blank path."""
    rng = np.random.default_rng(3)
    lp = random_log_probs(rng, 3, 3)
    loss, _ = ctc_forward_backward(lp, [], blank=2)
    assert loss == pytest.approx(-lp[:, 2].sum())


def test_target_too_long():
    """Test that impossible alignments raise instead of returning inf."""
    lp = random_log_probs(np.random.default_rng(0), 3, 3)
    with pytest.raises(TargetTooLongError):
        ctc_forward_backward(lp, [0, 1, 0, 1], blank=2)
    with pytest.raises(TargetTooLongError):
        ctc_forward_backward(lp, [0, 0, 0], blank=2)


def test_required_frames():
    """Test that repeats need a separating blank."""
    assert required_frames([]) == 0
    assert required_frames([1, 2]) == 2
    assert required_frames([1, 1, 2, 2]) == 6


def test_input_lengths_ignore_padding_frames():
    """Test that frames past the valid length do not change the loss."""
    rng = np.random.default_rng(4)
    short, full = random_log_probs(rng, 3, 3), random_log_probs(rng, 5, 3)
    padded = np.stack([np.vstack([short, random_log_probs(rng, 2, 3)]), full])
    log_probs = Tensor(padded, requires_grad=True)
    loss = ctc_loss(log_probs, [[0], [1, 0]], blank=2, input_lengths=np.array([3, 5]))
    expected = (ctc_forward_backward(short, [0], 2)[0] + ctc_forward_backward(full, [1, 0], 2)[0]) / 2
    assert loss.item() == pytest.approx(expected, rel=1e-5)
    loss.backward()
    assert np.all(log_probs.grad[0, 3:] == 0.0)


def test_greedy_decode_collapses():
    """Test repeat collapsing and blank removal."""
    a, b, blank = 0, 1, 2
    lp = np.log(np.eye(3)[[a, a, blank, b]] + 1e-9)
    assert greedy_decode(lp, blank) == [a, b]
    assert greedy_decode(np.log(np.eye(3)[[blank] * 4] + 1e-9), blank) == []
    assert greedy_decode(np.log(np.eye(3)[[a, blank, a]] + 1e-9), blank) == [a, a]


def test_greedy_decode_respects_length():
    """Test that frames past the valid length are not decoded."""
    lp = np.log(np.eye(3)[[0, 2, 1, 1]] + 1e-9)
    assert greedy_decode(lp, 2, length=2) == [0]


def test_batch_decode_length_mismatch():
    """Test the batch length check."""
    with pytest.raises(LengthMismatchError):
        batch_greedy_decode(np.zeros((2, 4, 3)), 2, [4])
