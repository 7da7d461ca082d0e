"""Tests for edit-distance labeling."""

import itertools

import numpy as np
import pytest

from clozecheck.core.alignment import align
from clozecheck.core.alignment import apply_labels
from clozecheck.core.alignment import derive_labels
from clozecheck.core.alignment import levenshtein
from clozecheck.core.alignment import reduce_binary
from clozecheck.core.types import EditLabel
from clozecheck.core.types import EditPayload
from clozecheck.core.types import LabelSeq
from clozecheck.exceptions import InconsistentScriptError


@pytest.fixture
def oracle():
    """Independent Levenshtein distance, skipping when rapidfuzz is missing."""
    return pytest.importorskip("rapidfuzz.distance").Levenshtein


def all_strings(alphabet: str, max_len: int) -> list[str]:
    return [
        "".join(chars)
        for n in range(max_len + 1)
        for chars in itertools.product(alphabet, repeat=n)
    ]


@pytest.mark.parametrize(
    ("content", "answer", "expected"),
    [
        ("ABCC", "ABCC", "O O O O O"),
        ("<AB>", "<AC>", "O O O B-sub O"),
        ("ADBEFG", "ABFG", "O B-add B-add O O"),
        ("ABCDEFG", "HIJKLMN", "O B-sub I-sub I-sub I-sub I-sub I-sub I-sub"),
        ("", "", "O"),
        ("b", "ab", "O B-del O"),
    ],
)
def test_derive_labels_examples(content, answer, expected):
    """Test the annotated label sequences, transliterated to a small alphabet."""
    assert derive_labels(content, answer).to_strings() == expected.split()


def test_derive_labels_original_script():
    """Test that labeling works on arbitrary code points."""
    assert derive_labels("水何澹澹", "水何澹澹").is_all_outside()
    assert derive_labels("《中度》", "《中庸》").to_strings() == ["O", "O", "O", "B-sub", "O"]
    assert derive_labels("自己寻找工作", "自寻工作").to_strings() == [
        "O",
        "B-add",
        "B-add",
        "O",
        "O",
    ]


def test_insertion_before_first_char_uses_blk():
    """Test that a leading insertion lands on the <BLK> position."""
    script = align("XAB", "AB")
    assert script.labels.to_strings() == ["B-add", "O", "O"]
    assert script.payload.insertions[0] == "X"


def test_substitution_with_trailing_insertion():
    """Test that characters inserted after a replaced one ride on its replacement."""
    script = align("AXYC", "ABC")
    assert script.labels.to_strings() == ["O", "O", "B-sub", "O"]
    assert script.payload.replacements[2] == "XY"
    assert apply_labels("ABC", script.labels, script.payload) == "AXYC"


def test_apply_labels_identity():
    """Test that all-O labels leave the answer unchanged."""
    assert apply_labels("ABC", LabelSeq.outside(3), EditPayload.empty(3)) == "ABC"


def test_apply_labels_single_deletion():
    """Test a deletion replayed by hand."""
    labels = LabelSeq.of(["O", "B-del", "O"])
    assert apply_labels("ab", labels, EditPayload.empty(2)) == "b"


def test_apply_labels_rejects_wrong_arity():
    """Test that labels must cover <BLK> plus every answer character."""
    with pytest.raises(InconsistentScriptError, match="expected 3"):
        apply_labels("ab", LabelSeq.outside(1), EditPayload.empty(1))


def test_apply_labels_rejects_missing_payload():
    """Test that a substitution without its replacement is inconsistent."""
    labels = LabelSeq.of(["O", "B-sub", "O"])
    with pytest.raises(InconsistentScriptError, match="replacement"):
        apply_labels("ab", labels, EditPayload.empty(2))


def test_alignment_exhaustive_oracle(oracle):
    """Test minimality and round trip on every pair up to length 4 over three characters."""
    strings = all_strings("abc", 4)
    for answer, content in itertools.product(strings, strings):
        script = align(content, answer)
        assert len(script.labels) == len(answer) + 1
        assert script.edit_count == oracle.distance(answer, content), (answer, content)
        assert apply_labels(answer, script.labels, script.payload) == content
        assert reduce_binary(script.labels) == int(answer != content)


def test_alignment_random_longer_pairs(oracle):
    """Test the same properties on random pairs of length up to 8."""
    rng = np.random.default_rng(0)
    alphabet = np.array(list("abcd"))
    for _ in range(10_000):
        answer = "".join(rng.choice(alphabet, size=int(rng.integers(0, 9))))
        content = "".join(rng.choice(alphabet, size=int(rng.integers(0, 9))))
        script = align(content, answer)
        assert script.edit_count == oracle.distance(answer, content)
        assert apply_labels(answer, script.labels, script.payload) == content


def test_levenshtein_matches_oracle(oracle):
    """Test the package DP against an independent implementation."""
    for a, b in itertools.product(all_strings("ab", 3), repeat=2):
        assert levenshtein(a, b) == oracle.distance(a, b)


@pytest.mark.parametrize(
    ("labels", "expected"),
    [
        (["O", "O", "O"], 0),
        (["O", "B-sub", "O"], 1),
        (["B-add"], 1),
    ],
)
def test_reduce_binary(labels, expected):
    """Test the binary reduction of label sequences."""
    assert reduce_binary(LabelSeq.of(labels)) == expected


def test_label_seq_validation():
    """Test the BIO chaining rules."""
    with pytest.raises(ValueError, match="inside labels"):
        LabelSeq.of(["O", "I-sub"])
    with pytest.raises(ValueError, match="inside labels"):
        LabelSeq.of(["O", "B-del", "I-sub"])
    with pytest.raises(ValueError, match="<BLK>"):
        LabelSeq.of(["B-sub", "O"])
    with pytest.raises(ValueError):
        LabelSeq(())


def test_label_seq_repaired():
    """Test that ill-formed predictions are repaired into valid sequences."""
    labels = [EditLabel.B_DEL, EditLabel.I_SUB, EditLabel.I_SUB, EditLabel.B_DEL, EditLabel.I_SUB]
    repaired = LabelSeq.repaired(labels)
    assert repaired.to_strings() == ["O", "B-sub", "I-sub", "B-del", "B-sub"]


def test_label_ids_follow_enum_order():
    """Test the output-head id of every label."""
    assert [label.index for label in EditLabel] == [0, 1, 2, 3, 4, 5]
    assert EditLabel.from_index(5) is EditLabel.B_ADD
    assert EditLabel.I_DEL.kind == "del"
    assert EditLabel.O.kind is None
