"""Domain dataclasses shared by every stage of the correction pipeline."""

import math
from collections.abc import Iterable
from collections.abc import Iterator
from dataclasses import dataclass
from dataclasses import field
from enum import Enum

import numpy as np


class EditLabel(Enum):
    """Edit label of one answer position.

    The enum order defines the integer ids used by the output head.
    """

    O = "O"  # noqa: E741
    B_SUB = "B-sub"
    I_SUB = "I-sub"
    B_DEL = "B-del"
    I_DEL = "I-del"
    B_ADD = "B-add"

    @property
    def index(self) -> int:
        return LABEL_ORDER.index(self)

    @property
    def kind(self) -> str | None:
        """Edit family ("sub", "del", "add") or None for O."""
        if self is EditLabel.O:
            return None
        return self.value.split("-", 1)[1]

    @property
    def is_inside(self) -> bool:
        return self in (EditLabel.I_SUB, EditLabel.I_DEL)

    @classmethod
    def from_index(cls, index: int) -> "EditLabel":
        return LABEL_ORDER[index]


LABEL_ORDER: tuple[EditLabel, ...] = tuple(EditLabel)
NUM_LABELS = len(LABEL_ORDER)
IGNORE_LABEL = -1

_BEGIN_OF = {EditLabel.I_SUB: EditLabel.B_SUB, EditLabel.I_DEL: EditLabel.B_DEL}
_ALLOWED_BEFORE_INSIDE = {
    EditLabel.I_SUB: (EditLabel.B_SUB, EditLabel.I_SUB),
    EditLabel.I_DEL: (EditLabel.B_DEL, EditLabel.I_DEL),
}


@dataclass(frozen=True)
class LabelSeq:
    """Label sequence aligned to ``<BLK>`` + answer characters.

    Position 0 is the ``<BLK>`` placeholder and only carries O or B-add.
    Construction validates the BIO chaining rules.
    """

    labels: tuple[EditLabel, ...]

    def __post_init__(self) -> None:
        if not self.labels:
            msg = "LabelSeq needs at least the <BLK> position"
            raise ValueError(msg)
        if self.labels[0] not in (EditLabel.O, EditLabel.B_ADD):
            msg = f"<BLK> position carries {self.labels[0].value}, expected O or B-add"
            raise ValueError(msg)
        for i in range(1, len(self.labels)):
            label = self.labels[i]
            if label.is_inside and self.labels[i - 1] not in _ALLOWED_BEFORE_INSIDE[label]:
                msg = (
                    f"{label.value} at position {i} follows {self.labels[i - 1].value}; "
                    "inside labels must continue a span of the same kind"
                )
                raise ValueError(msg)

    @classmethod
    def of(cls, labels: Iterable[EditLabel | str]) -> "LabelSeq":
        """Build from labels or their string form ("O", "B-sub", ...)."""
        return cls(tuple(EditLabel(x) if isinstance(x, str) else x for x in labels))

    @classmethod
    def outside(cls, answer_len: int) -> "LabelSeq":
        """All-O sequence for an answer of ``answer_len`` characters."""
        return cls((EditLabel.O,) * (answer_len + 1))

    @classmethod
    def repaired(cls, labels: Iterable[EditLabel]) -> "LabelSeq":
        """Build from possibly ill-formed labels (model predictions).

        An inside label that does not continue a span of its kind opens one
        instead; anything but O/B-add at the ``<BLK>`` position becomes O.
        """
        fixed: list[EditLabel] = []
        for i, label in enumerate(labels):
            if i == 0 and label not in (EditLabel.O, EditLabel.B_ADD):
                fixed.append(EditLabel.O)
                continue
            if label.is_inside and (not fixed or fixed[-1] not in _ALLOWED_BEFORE_INSIDE[label]):
                fixed.append(_BEGIN_OF[label])
                continue
            fixed.append(label)
        return cls(tuple(fixed))

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[EditLabel]:
        return iter(self.labels)

    def __getitem__(self, index: int) -> EditLabel:
        return self.labels[index]

    @property
    def answer_len(self) -> int:
        return len(self.labels) - 1

    def is_all_outside(self) -> bool:
        return all(label is EditLabel.O for label in self.labels)

    def to_strings(self) -> list[str]:
        return [label.value for label in self.labels]

    def to_ids(self) -> list[int]:
        return [label.index for label in self.labels]


@dataclass(frozen=True)
class EditPayload:
    """Characters needed to replay a label sequence on its answer.

    ``replacements[i]`` is non-empty exactly at sub positions and holds the
    replacing content character followed by any characters inserted right
    after it; ``insertions[i]`` is non-empty exactly at B-add positions.
    Both tuples have one entry per label (``<BLK>`` included).
    """

    replacements: tuple[str, ...]
    insertions: tuple[str, ...]

    @classmethod
    def empty(cls, answer_len: int) -> "EditPayload":
        blank = ("",) * (answer_len + 1)
        return cls(blank, blank)


@dataclass(frozen=True)
class EditScript:
    """Minimal labeled edit script turning an answer into the handwritten content."""

    labels: LabelSeq
    payload: EditPayload

    @property
    def edit_count(self) -> int:
        """Number of edited characters (deleted, replaced or inserted)."""
        deleted = sum(1 for label in self.labels if label.kind == "del")
        replaced = sum(len(r) for r in self.payload.replacements)
        inserted = sum(len(s) for s in self.payload.insertions)
        return deleted + replaced + inserted


@dataclass(frozen=True)
class GlyphStyle:
    """Writer style applied to every glyph of a line."""

    style_id: int = 0
    x_shift: int = 0
    y_shift: int = 0
    thickness: int = 0
    width_scale: float = 1.0

    def __post_init__(self) -> None:
        if not 0.7 <= self.width_scale <= 1.4:
            msg = f"width_scale must be in [0.7, 1.4], got {self.width_scale}"
            raise ValueError(msg)


@dataclass(frozen=True, eq=False)
class GlyphImage:
    """Grayscale image in [0, 1] (1.0 = background, 0.0 = ink), row-major.

    ``valid_width`` is the rendered width before right padding.
    """

    pixels: np.ndarray
    valid_width: int

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    def valid_blocks(self, block_width: int) -> int:
        """Number of pixel blocks that contain rendered (non-padding) columns."""
        return math.ceil(self.valid_width / block_width)

    def same_pixels(self, other: "GlyphImage") -> bool:
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


@dataclass
class Sample:
    """One correction instance: image, handwritten content, answer and labels."""

    id: str
    content: str
    answer: str
    labels: LabelSeq
    y: int
    image: GlyphImage | None = None
    image_path: str = ""
    shard: str = "synthetic"
    split: str = "train"


@dataclass
class MetricsReport:
    """Evaluation results of one system on one test manifest."""

    system: str
    seq_precision: float = 0.0
    seq_recall: float = 0.0
    seq_f1: float = 0.0
    seq_token_precision: float = 0.0
    seq_token_recall: float = 0.0
    seq_token_f1: float = 0.0
    bin_precision: float = 0.0
    bin_recall: float = 0.0
    bin_f1: float = 0.0
    bin_accuracy: float = 0.0
    cer: float | None = None
    sequence_level: bool = False
    counts: dict[str, int] = field(default_factory=dict)
    tags: dict[str, str] = field(default_factory=dict)
