"""Tests for CER, sequence metrics and binary metrics."""

import numpy as np
import pytest

from clozecheck.core.alignment import derive_labels
from clozecheck.core.types import LabelSeq
from clozecheck.evaluation.metrics import binary_counts
from clozecheck.evaluation.metrics import binary_from_labels
from clozecheck.evaluation.metrics import binary_metrics
from clozecheck.evaluation.metrics import build_report
from clozecheck.evaluation.metrics import cer
from clozecheck.evaluation.metrics import corpus_cer
from clozecheck.evaluation.metrics import extract_spans
from clozecheck.evaluation.metrics import ocr_pipeline_correct
from clozecheck.evaluation.metrics import sequence_metrics
from clozecheck.evaluation.metrics import token_metrics
from clozecheck.exceptions import LengthMismatchError


def seq(*labels: str) -> LabelSeq:
    return LabelSeq.of(labels)


@pytest.mark.parametrize(
    ("hypothesis", "reference", "expected"),
    [
        ("abc", "abc", 0.0),
        ("abc", "abd", 1 / 3),
        ("", "ab", 1.0),
        ("ab", "", 2.0),
        ("", "", 0.0),
    ],
)
def test_cer(hypothesis, reference, expected):
    """Test CER examples, including the empty-reference guard."""
    assert cer(hypothesis, reference) == pytest.approx(expected)


def test_corpus_cer_weights_by_length():
    """Test that corpus CER sums edits over reference lengths."""
    assert corpus_cer(["abc", "x"], ["abd", "xyzw"]) == pytest.approx(4 / 7)
    with pytest.raises(LengthMismatchError):
        corpus_cer(["a"], [])


def test_extract_spans():
    """Test span boundaries and the one-position add spans."""
    labels = seq("B-add", "B-sub", "I-sub", "O", "B-del", "I-del", "B-add")
    assert extract_spans(labels) == [
        ("add", 0, 0),
        ("sub", 1, 2),
        ("del", 4, 5),
        ("add", 6, 6),
    ]
    assert extract_spans(seq("O", "O")) == []


def test_sequence_metrics_hand_case():
    """Test exact-match span scoring on one pair."""
    gold = seq("O", "O", "O", "B-sub", "O", "O")
    pred = seq("O", "B-del", "O", "B-sub", "O", "O")
    p, r, f1 = sequence_metrics([pred], [gold])
    assert (p, r) == (0.5, 1.0)
    assert f1 == pytest.approx(2 / 3)


def test_sequence_metrics_partial_span_is_a_miss():
    """Test that a span with the wrong end counts as both fp and fn."""
    gold = seq("O", "B-sub", "I-sub")
    pred = seq("O", "B-sub", "O")
    assert sequence_metrics([pred], [gold]) == (0.0, 0.0, 0.0)


def test_sequence_metrics_match_seqeval():
    """Test span metrics against seqeval on random well-formed sequences."""
    seqeval_metrics = pytest.importorskip("seqeval.metrics")
    rng = np.random.default_rng(0)
    alphabet = "abc"
    gold, pred = [], []
    for _ in range(300):
        answer = "".join(rng.choice(list(alphabet), size=rng.integers(0, 5)))
        truth = "".join(rng.choice(list(alphabet), size=rng.integers(0, 5)))
        guess = "".join(rng.choice(list(alphabet), size=rng.integers(0, 5)))
        gold.append(derive_labels(truth, answer))
        pred.append(derive_labels(guess, answer))
    y_true = [s.to_strings() for s in gold]
    y_pred = [s.to_strings() for s in pred]
    p, r, f1 = sequence_metrics(pred, gold)
    assert p == pytest.approx(seqeval_metrics.precision_score(y_true, y_pred))
    assert r == pytest.approx(seqeval_metrics.recall_score(y_true, y_pred))
    assert f1 == pytest.approx(seqeval_metrics.f1_score(y_true, y_pred))


def test_token_metrics():
    """Test per-position scoring over non-O labels."""
    gold = seq("O", "B-sub", "I-sub")
    pred = seq("O", "B-sub", "O")
    p, r, f1 = token_metrics([pred], [gold])
    assert (p, r) == (1.0, 0.5)
    assert f1 == pytest.approx(2 / 3)


def test_sequence_length_mismatch():
    """Test list and pair length checks."""
    with pytest.raises(LengthMismatchError, match="2 predictions"):
        sequence_metrics([seq("O"), seq("O")], [seq("O")])
    with pytest.raises(LengthMismatchError, match="pair 0"):
        token_metrics([seq("O")], [seq("O", "O")])


def test_binary_metrics_imbalanced():
    """Test trivial predictors on a 573:100 right:wrong test set."""
    gold = [0] * 573 + [1] * 100
    always_wrong = binary_metrics([1] * 673, gold)
    assert always_wrong.precision == pytest.approx(100 / 673)
    assert always_wrong.recall == 1.0
    always_right = binary_metrics([0] * 673, gold)
    assert always_right.recall == 0.0
    assert always_right.precision == 0.0
    assert always_right.f1 == 0.0
    assert always_right.accuracy == pytest.approx(573 / 673)


def test_binary_counts():
    """Test the confusion counts and the value check."""
    assert binary_counts([1, 0, 1, 0], [1, 1, 0, 0]) == {"tp": 1, "fp": 1, "fn": 1, "tn": 1}
    with pytest.raises(ValueError, match="0 or 1"):
        binary_counts([2], [1])
    with pytest.raises(LengthMismatchError):
        binary_counts([1], [1, 0])


def test_ocr_pipeline_correct():
    """Test the exact-match baseline with stripped characters."""
    assert ocr_pipeline_correct("AB", "AB") == 0
    assert ocr_pipeline_correct("AB", "AC") == 1
    assert ocr_pipeline_correct("A.B", "AB", strip_chars=".") == 0


def test_build_report():
    """Test that a report carries every metric."""
    gold = [seq("O", "O"), seq("O", "B-sub")]
    pred = [seq("O", "O"), seq("O", "B-sub")]
    report = build_report(
        "mac",
        binary_from_labels(pred),
        binary_from_labels(gold),
        pred,
        gold,
        cer_value=0.25,
        tags={"variant": "base"},
    )
    assert report.system == "mac"
    assert report.sequence_level
    assert report.seq_f1 == 1.0
    assert report.bin_accuracy == 1.0
    assert report.counts == {"tp": 1, "fp": 0, "fn": 0, "tn": 1}
    assert report.cer == 0.25
    assert report.tags == {"variant": "base"}


def test_build_report_binary_only():
    """Test that sequence metrics stay unset without label sequences."""
    report = build_report("ocr-pipeline", [0, 1], [0, 0])
    assert not report.sequence_level
    assert report.seq_f1 == 0.0
    assert report.bin_accuracy == 0.5
