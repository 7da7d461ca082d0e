"""Edit-distance BIO labeling of an answer against the handwritten content.

The labels describe how the answer has to change to become what the
student actually wrote. Position 0 is the ``<BLK>`` placeholder, which only
exists so an insertion before the first answer character has a home.
"""

from collections.abc import Sequence

import numpy as np

from clozecheck.core.types import EditLabel
from clozecheck.core.types import EditPayload
from clozecheck.core.types import EditScript
from clozecheck.core.types import LabelSeq
from clozecheck.exceptions import InconsistentScriptError


_BEGIN = {"sub": EditLabel.B_SUB, "del": EditLabel.B_DEL}
_INSIDE = {"sub": EditLabel.I_SUB, "del": EditLabel.I_DEL}


def levenshtein(a: Sequence[str], b: Sequence[str]) -> int:
    """Unit-cost edit distance between two sequences.

    Example:
        >>> levenshtein("abc", "abd")
        1
        >>> levenshtein("", "ab")
        2
    """
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def suffix_distances(answer: str, content: str) -> np.ndarray:
    """``D[i, j]`` = edit distance between ``answer[i:]`` and ``content[j:]``."""
    m, n = len(answer), len(content)
    dist = np.zeros((m + 1, n + 1), dtype=np.int64)
    dist[m, :] = np.arange(n, -1, -1)
    dist[:, n] = np.arange(m, -1, -1)
    for i in range(m - 1, -1, -1):
        for j in range(n - 1, -1, -1):
            dist[i, j] = min(
                dist[i + 1, j + 1] + (answer[i] != content[j]),
                dist[i + 1, j] + 1,
                dist[i, j + 1] + 1,
            )
    return dist


def align(content: str, answer: str) -> EditScript:
    """Compute the labeled minimal edit script from ``answer`` to ``content``.

    The suffix distance table is walked from the left; among moves that stay
    on an optimal path the first of match, substitution, deletion (of an
    answer character), insertion (of a content character) wins.

    Args:
        content: Handwritten content H.
        answer: Ground answer A.

    Returns:
        EditScript whose labels have ``len(answer) + 1`` entries.
    """
    m, n = len(answer), len(content)
    dist = suffix_distances(answer, content)

    kinds: list[str | None] = [None] * (m + 1)
    replacements = [""] * (m + 1)
    insertions = [""] * (m + 1)

    i = j = 0
    while i < m or j < n:
        here = dist[i, j]
        if i < m and j < n and answer[i] == content[j] and here == dist[i + 1, j + 1]:
            i, j = i + 1, j + 1
        elif i < m and j < n and here == dist[i + 1, j + 1] + 1:
            kinds[i + 1] = "sub"
            replacements[i + 1] = content[j]
            i, j = i + 1, j + 1
        elif i < m and here == dist[i + 1, j] + 1:
            kinds[i + 1] = "del"
            i += 1
        else:
            insertions[i] += content[j]
            j += 1

    # one label per position: insertions after a replaced character ride on
    # its replacement; a minimal script never inserts right after a deletion
    for pos in range(1, m + 1):
        if insertions[pos] and kinds[pos] is not None:
            if kinds[pos] == "del":
                kinds[pos] = "sub"
            replacements[pos] += insertions[pos]
            insertions[pos] = ""

    labels = [EditLabel.B_ADD if insertions[0] else EditLabel.O]
    for pos in range(1, m + 1):
        kind = kinds[pos]
        if kind is None:
            labels.append(EditLabel.B_ADD if insertions[pos] else EditLabel.O)
        elif pos > 1 and kinds[pos - 1] == kind:
            labels.append(_INSIDE[kind])
        else:
            labels.append(_BEGIN[kind])

    return EditScript(
        labels=LabelSeq(tuple(labels)),
        payload=EditPayload(tuple(replacements), tuple(insertions)),
    )


def derive_labels(content: str, answer: str) -> LabelSeq:
    """BIO edit labels of ``answer`` against the handwritten ``content``.

    Example:
        >>> derive_labels("b", "ab").to_strings()
        ['O', 'B-del', 'O']
    """
    return align(content, answer).labels


def apply_labels(answer: str, labels: LabelSeq, edits: EditPayload) -> str:
    """Replay a labeled edit script on ``answer``.

    Raises:
        InconsistentScriptError: If labels or payloads do not fit the answer,
            or a payload entry contradicts its label.
    """
    m = len(answer)
    if len(labels) != m + 1:
        msg = f"{len(labels)} labels for an answer of length {m} (expected {m + 1})"
        raise InconsistentScriptError(msg)
    if len(edits.replacements) != m + 1 or len(edits.insertions) != m + 1:
        msg = (
            f"payload arity ({len(edits.replacements)}, {len(edits.insertions)}) "
            f"does not match {m + 1} labels"
        )
        raise InconsistentScriptError(msg)

    out: list[str] = []
    for pos, label in enumerate(labels):
        replacement = edits.replacements[pos]
        inserted = edits.insertions[pos]
        if (label is EditLabel.B_ADD) != bool(inserted):
            msg = f"position {pos}: label {label.value} with insertion payload {inserted!r}"
            raise InconsistentScriptError(msg)
        if (label.kind == "sub") != bool(replacement):
            msg = f"position {pos}: label {label.value} with replacement payload {replacement!r}"
            raise InconsistentScriptError(msg)

        if pos > 0:
            if label.kind == "sub":
                out.append(replacement)
            elif label.kind != "del":
                out.append(answer[pos - 1])
        out.append(inserted)
    return "".join(out)


def reduce_binary(labels: LabelSeq) -> int:
    """Binary correction result: 0 (right) iff every label is O, else 1 (wrong)."""
    return 0 if labels.is_all_outside() else 1
