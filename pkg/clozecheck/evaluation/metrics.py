"""Character error rate, span/token sequence metrics and binary metrics.

For the binary metrics the positive class is ``y = 1`` (the answer is
wrong). Any rate whose denominator is zero is reported as 0.
"""

from collections.abc import Sequence
from typing import NamedTuple

from clozecheck.core.alignment import levenshtein
from clozecheck.core.alignment import reduce_binary
from clozecheck.core.types import EditLabel
from clozecheck.core.types import LabelSeq
from clozecheck.core.types import MetricsReport
from clozecheck.core.vocab import strip_punctuation
from clozecheck.exceptions import LengthMismatchError


Span = tuple[str, int, int]


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


class BinaryMetrics(NamedTuple):
    precision: float
    recall: float
    f1: float
    accuracy: float


def safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def prf(tp: int, fp: int, fn: int) -> PRF:
    """Precision, recall and F1 from counts.

    Example:
        >>> prf(1, 1, 0)
        PRF(precision=0.5, recall=1.0, f1=0.6666666666666666)
    """
    precision = safe_div(tp, tp + fp)
    recall = safe_div(tp, tp + fn)
    return PRF(precision, recall, safe_div(2 * precision * recall, precision + recall))


def cer(hypothesis: str, reference: str) -> float:
    """``levenshtein(hyp, ref) / max(1, |ref|)``.

    Example:
        >>> round(cer("abc", "abd"), 4)
        0.3333
    """
    return levenshtein(hypothesis, reference) / max(1, len(reference))


def corpus_cer(hypotheses: Sequence[str], references: Sequence[str]) -> float:
    """Total edits over total (guarded) reference length."""
    _check_lengths(hypotheses, references, "hypotheses", "references")
    edits = sum(levenshtein(h, r) for h, r in zip(hypotheses, references, strict=True))
    return safe_div(edits, sum(max(1, len(r)) for r in references))


def extract_spans(labels: LabelSeq) -> list[Span]:
    """BIO chunks as ``(kind, start, end)`` with ``end`` inclusive.

    ``sub`` and ``del`` spans run from their B label over the following I
    labels; every ``B-add`` is a span of its own, ``(add, pos, pos)``.

    Example:
        >>> extract_spans(LabelSeq.of(["B-add", "B-sub", "I-sub", "O", "B-del"]))
        [('add', 0, 0), ('sub', 1, 2), ('del', 4, 4)]
    """
    spans: list[Span] = []
    start: int | None = None
    kind: str | None = None
    for pos, label in enumerate(labels):
        if label.is_inside:
            continue
        if start is not None and kind is not None:
            spans.append((kind, start, pos - 1))
            start = kind = None
        if label is EditLabel.B_ADD:
            spans.append(("add", pos, pos))
        elif label is not EditLabel.O:
            start, kind = pos, label.kind
    if start is not None and kind is not None:
        spans.append((kind, start, len(labels) - 1))
    return spans


def _check_lengths(a: Sequence[object], b: Sequence[object], name_a: str, name_b: str) -> None:
    if len(a) != len(b):
        msg = f"{len(a)} {name_a} for {len(b)} {name_b}"
        raise LengthMismatchError(msg)


def _check_pairs(pred: Sequence[LabelSeq], gold: Sequence[LabelSeq]) -> None:
    _check_lengths(pred, gold, "predictions", "gold sequences")
    for i, (p, g) in enumerate(zip(pred, gold, strict=True)):
        if len(p) != len(g):
            msg = f"pair {i}: predicted length {len(p)} differs from gold length {len(g)}"
            raise LengthMismatchError(msg)


def sequence_metrics(pred: Sequence[LabelSeq], gold: Sequence[LabelSeq]) -> PRF:
    """Micro-averaged exact-match span precision, recall and F1.

    Raises:
        LengthMismatchError: If the lists or any pair differ in length.
    """
    _check_pairs(pred, gold)
    tp = fp = fn = 0
    for p, g in zip(pred, gold, strict=True):
        pred_spans = set(extract_spans(p))
        gold_spans = set(extract_spans(g))
        hits = len(pred_spans & gold_spans)
        tp += hits
        fp += len(pred_spans) - hits
        fn += len(gold_spans) - hits
    return prf(tp, fp, fn)


def token_metrics(pred: Sequence[LabelSeq], gold: Sequence[LabelSeq]) -> PRF:
    """Micro-averaged precision, recall and F1 over non-O positions.

    Raises:
        LengthMismatchError: If the lists or any pair differ in length.
    """
    _check_pairs(pred, gold)
    tp = fp = fn = 0
    for p, g in zip(pred, gold, strict=True):
        for lp, lg in zip(p, g, strict=True):
            if lp is lg:
                tp += lp is not EditLabel.O
                continue
            fp += lp is not EditLabel.O
            fn += lg is not EditLabel.O
    return prf(tp, fp, fn)


def binary_counts(pred_y: Sequence[int], gold_y: Sequence[int]) -> dict[str, int]:
    """Confusion counts with ``y = 1`` as the positive class.

    Raises:
        LengthMismatchError: If the lists differ in length.
        ValueError: If a value is not 0 or 1.
    """
    _check_lengths(pred_y, gold_y, "predictions", "gold results")
    counts = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
    for p, g in zip(pred_y, gold_y, strict=True):
        if p not in (0, 1) or g not in (0, 1):
            msg = f"binary results must be 0 or 1, got prediction {p} and gold {g}"
            raise ValueError(msg)
        key = ("tp" if p else "fn") if g else ("fp" if p else "tn")
        counts[key] += 1
    return counts


def binary_metrics(pred_y: Sequence[int], gold_y: Sequence[int]) -> BinaryMetrics:
    """Precision, recall, F1 on ``y = 1`` and accuracy.

    Example:
        >>> binary_metrics([1, 1, 0, 0], [1, 0, 0, 0])
        BinaryMetrics(precision=0.5, recall=1.0, f1=0.6666666666666666, accuracy=0.75)
    """
    c = binary_counts(pred_y, gold_y)
    scores = prf(c["tp"], c["fp"], c["fn"])
    return BinaryMetrics(*scores, safe_div(c["tp"] + c["tn"], sum(c.values())))


def ocr_pipeline_correct(decoded: str, answer: str, strip_chars: str = "") -> int:
    """Recognize-then-compare baseline: 0 iff the stripped strings match exactly."""
    same = strip_punctuation(decoded, strip_chars) == strip_punctuation(answer, strip_chars)
    return 0 if same else 1


def build_report(
    system: str,
    pred_y: Sequence[int],
    gold_y: Sequence[int],
    pred_labels: Sequence[LabelSeq] | None = None,
    gold_labels: Sequence[LabelSeq] | None = None,
    cer_value: float | None = None,
    tags: dict[str, str] | None = None,
) -> MetricsReport:
    """Collect every metric of one system into a report.

    Sequence metrics are filled only when label sequences are given.
    """
    counts = binary_counts(pred_y, gold_y)
    binary = binary_metrics(pred_y, gold_y)
    report = MetricsReport(
        system=system,
        bin_precision=binary.precision,
        bin_recall=binary.recall,
        bin_f1=binary.f1,
        bin_accuracy=binary.accuracy,
        cer=cer_value,
        counts=counts,
        tags=dict(tags or {}),
    )
    if pred_labels is not None and gold_labels is not None:
        spans = sequence_metrics(pred_labels, gold_labels)
        tokens = token_metrics(pred_labels, gold_labels)
        report.sequence_level = True
        report.seq_precision, report.seq_recall, report.seq_f1 = spans
        report.seq_token_precision, report.seq_token_recall, report.seq_token_f1 = tokens
    return report


def binary_from_labels(labels: Sequence[LabelSeq]) -> list[int]:
    return [reduce_binary(seq) for seq in labels]
