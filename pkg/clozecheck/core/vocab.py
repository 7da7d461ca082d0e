"""Character inventory, special symbols and shape-similar confusion sets."""

import string
from collections.abc import Iterable
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path

import numpy as np

from clozecheck.exceptions import AnswerTooLongError
from clozecheck.exceptions import ConfigError
from clozecheck.exceptions import NoConfusionError
from clozecheck.exceptions import UnknownCharError


PAD_TEXT = "<PAD>"
BLK_PLACEHOLDER = "<BLK>"
CTC_BLANK = "<BLANK>"

SYNTHETIC_ALPHABET = string.ascii_uppercase + string.ascii_lowercase + string.digits + "#@"


@dataclass(frozen=True)
class Vocabulary:
    """Ordered characters plus three reserved special ids.

    Characters take ids ``0..n-1``; the CTC blank is ``n`` (so the CTC head
    has ``n + 1`` outputs), then the text padding id and the ``<BLK>`` id.
    """

    chars: tuple[str, ...]
    id_of: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(set(self.chars)) != len(self.chars):
            msg = "Vocabulary characters must be unique"
            raise ConfigError(msg)
        for special in (PAD_TEXT, BLK_PLACEHOLDER, CTC_BLANK):
            if special in self.chars:
                msg = f"Reserved symbol {special} cannot be a vocabulary character"
                raise ConfigError(msg)
        object.__setattr__(self, "id_of", {c: i for i, c in enumerate(self.chars)})

    @classmethod
    def synthetic(cls, size: int = 64) -> "Vocabulary":
        """Desk-scale alphabet of ``size`` opaque characters (at most 64)."""
        if not 0 < size <= len(SYNTHETIC_ALPHABET):
            msg = f"Synthetic vocabulary size must be in [1, {len(SYNTHETIC_ALPHABET)}]"
            raise ConfigError(msg)
        return cls(tuple(SYNTHETIC_ALPHABET[:size]))

    @classmethod
    def load(cls, path: Path) -> "Vocabulary":
        """Read a UTF-8 file with one character per line."""
        lines = path.read_text(encoding="utf-8").splitlines()
        return cls(tuple(line for line in lines if line))

    def save(self, path: Path) -> None:
        path.write_text("".join(f"{c}\n" for c in self.chars), encoding="utf-8")

    @property
    def num_chars(self) -> int:
        return len(self.chars)

    @property
    def blank_id(self) -> int:
        return len(self.chars)

    @property
    def pad_id(self) -> int:
        return len(self.chars) + 1

    @property
    def blk_id(self) -> int:
        return len(self.chars) + 2

    @property
    def size(self) -> int:
        """Total number of ids, specials included."""
        return len(self.chars) + 3

    def __contains__(self, char: object) -> bool:
        return char in self.id_of

    def encode_text(self, text: str) -> list[int]:
        """Map characters to ids.

        Raises:
            UnknownCharError: If a character is not in the vocabulary.
        """
        ids: list[int] = []
        for pos, char in enumerate(text):
            idx = self.id_of.get(char)
            if idx is None:
                raise UnknownCharError(pos, char)
            ids.append(idx)
        return ids

    def encode_answer(self, answer: str, max_len: int) -> np.ndarray:
        """``<BLK>`` + answer ids, right-padded with the PAD id to ``max_len``.

        Raises:
            AnswerTooLongError: If ``len(answer) + 1 > max_len``.
            UnknownCharError: If a character is not in the vocabulary.
        """
        if len(answer) + 1 > max_len:
            raise AnswerTooLongError(len(answer), max_len)
        ids = np.full(max_len, self.pad_id, dtype=np.int64)
        ids[0] = self.blk_id
        ids[1 : len(answer) + 1] = self.encode_text(answer)
        return ids

    def decode_text(self, ids: Iterable[int]) -> str:
        """Map character ids back to text; special ids are rejected."""
        out: list[str] = []
        for pos, idx in enumerate(ids):
            if not 0 <= idx < len(self.chars):
                raise UnknownCharError(pos, f"<id {idx}>")
            out.append(self.chars[idx])
        return "".join(out)


def encode_text(text: str, vocab: Vocabulary) -> list[int]:
    return vocab.encode_text(text)


def decode_text(ids: Iterable[int], vocab: Vocabulary) -> str:
    return vocab.decode_text(ids)


def strip_punctuation(text: str, strip_chars: str) -> str:
    """Remove every character of ``strip_chars`` from ``text``."""
    if not strip_chars:
        return text
    return "".join(c for c in text if c not in strip_chars)


@dataclass(frozen=True)
class ConfusionSet:
    """Map from a character to its shape-similar substitutes."""

    pairs: dict[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        for char, subs in self.pairs.items():
            if not subs:
                msg = f"Confusion entry for {char!r} is empty"
                raise ConfigError(msg)
            if char in subs:
                msg = f"Confusion entry for {char!r} maps the character to itself"
                raise ConfigError(msg)

    def validate(self, vocab: Vocabulary) -> None:
        """Check that every character and substitute belongs to ``vocab``."""
        for char, subs in self.pairs.items():
            for pos, c in enumerate((char, *subs)):
                if c not in vocab:
                    raise UnknownCharError(pos, c)

    def __contains__(self, char: object) -> bool:
        return char in self.pairs

    def substitutes(self, char: str) -> tuple[str, ...]:
        subs = self.pairs.get(char)
        if subs is None:
            raise NoConfusionError(char)
        return subs

    @classmethod
    def synthetic(
        cls, vocab: Vocabulary, family_size: int = 4, seed: int = 0
    ) -> "ConfusionSet":
        """Group the vocabulary into look-alike families of ``family_size``.

        Every member of a family confuses with every other member. Glyphs
        for a family are later drawn from one shared base pattern.
        """
        rng = np.random.default_rng(seed)
        order = list(vocab.chars)
        rng.shuffle(order)
        pairs: dict[str, tuple[str, ...]] = {}
        for start in range(0, len(order), family_size):
            family = order[start : start + family_size]
            if len(family) < 2:
                continue
            for c in family:
                pairs[c] = tuple(x for x in family if x != c)
        return cls(pairs)

    @classmethod
    def load(cls, path: Path) -> "ConfusionSet":
        """Read ``char<TAB>sub1,sub2,...`` lines."""
        pairs: dict[str, tuple[str, ...]] = {}
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                char, rest = line.split("\t", 1)
            except ValueError:
                msg = f"{path}:{lineno}: expected 'char<TAB>sub1,sub2,...'"
                raise ConfigError(msg) from None
            pairs[char] = tuple(s for s in rest.split(",") if s)
        return cls(pairs)

    def save(self, path: Path) -> None:
        lines = [f"{char}\t{','.join(subs)}\n" for char, subs in self.pairs.items()]
        path.write_text("".join(lines), encoding="utf-8")


def sample_confusion(c: str, confusion: ConfusionSet, rng: np.random.Generator) -> str:
    """Draw a shape-similar substitute for ``c`` uniformly from its entry.

    Raises:
        NoConfusionError: If ``c`` has no entry.
    """
    subs = confusion.substitutes(c)
    return subs[int(rng.integers(len(subs)))]


def substitute_char(
    c: str,
    confusion: ConfusionSet,
    vocab: Vocabulary,
    rng: np.random.Generator,
    strip_chars: str = "",
) -> str:
    """Shape-similar substitute, falling back to a uniform vocabulary char != c.

    Characters of ``strip_chars`` are never drawn.
    """
    subs = [s for s in confusion.pairs.get(c, ()) if s not in strip_chars]
    if subs:
        return subs[int(rng.integers(len(subs)))]
    return random_other_char(c, edit_chars(vocab, strip_chars), rng)


def edit_chars(vocab: Vocabulary, strip_chars: str = "") -> list[str]:
    """Characters an answer or a student edit may contain: ``vocab`` minus ``strip_chars``."""
    return [c for c in vocab.chars if c not in strip_chars]


def random_other_char(c: str, chars: Sequence[str], rng: np.random.Generator) -> str:
    candidates = [x for x in chars if x != c]
    if not candidates:
        msg = "Vocabulary needs at least two characters to substitute"
        raise ConfigError(msg)
    return candidates[int(rng.integers(len(candidates)))]
