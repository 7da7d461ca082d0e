"""JSONL manifests, sample validation, dataset statistics and batching."""

import json
import logging
from collections.abc import Iterator
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import ValidationError

from clozecheck.core.alignment import derive_labels
from clozecheck.core.alignment import reduce_binary
from clozecheck.core.config import GeometryConfig
from clozecheck.core.types import IGNORE_LABEL
from clozecheck.core.types import GlyphImage
from clozecheck.core.types import LabelSeq
from clozecheck.core.types import Sample
from clozecheck.core.vocab import Vocabulary
from clozecheck.core.vocab import strip_punctuation
from clozecheck.exceptions import GeometryMismatchError
from clozecheck.exceptions import InconsistentScriptError
from clozecheck.imaging.pgm import load_glyph_image
from clozecheck.imaging.pgm import save_pgm


logger = logging.getLogger(__name__)


class SampleRecord(BaseModel):
    """One manifest line."""

    model_config = ConfigDict(extra="forbid")

    id: str
    image_path: str
    content: str
    answer: str
    labels: list[Literal["O", "B-sub", "I-sub", "B-del", "I-del", "B-add"]]
    y: Literal[0, 1]
    valid_width: int
    shard: str = "synthetic"
    split: str = "train"

    @classmethod
    def from_sample(cls, sample: Sample) -> "SampleRecord":
        assert sample.image is not None
        return cls(
            id=sample.id,
            image_path=sample.image_path,
            content=sample.content,
            answer=sample.answer,
            labels=sample.labels.to_strings(),
            y=sample.y,
            valid_width=sample.image.valid_width,
            shard=sample.shard,
            split=sample.split,
        )


def check_sample(sample: Sample, strip_chars: str = "") -> None:
    """Verify the label/answer/content/y contract of one sample.

    Labels are compared against an alignment of content and answer with
    ``strip_chars`` removed, so the stored answer must already be free of them.

    Raises:
        InconsistentScriptError: If labels disagree with a fresh alignment
            or ``y`` disagrees with the labels.
    """
    content = strip_punctuation(sample.content, strip_chars)
    answer = strip_punctuation(sample.answer, strip_chars)
    if answer != sample.answer:
        msg = f"{sample.id}: answer {sample.answer!r} contains stripped characters"
        raise InconsistentScriptError(msg)
    if sample.labels.answer_len != len(answer):
        msg = f"{sample.id}: {len(sample.labels)} labels for answer {answer!r}"
        raise InconsistentScriptError(msg)
    expected = derive_labels(content, answer)
    if expected != sample.labels:
        msg = (
            f"{sample.id}: stored labels {sample.labels.to_strings()} differ from "
            f"derived {expected.to_strings()}"
        )
        raise InconsistentScriptError(msg)
    if sample.y != reduce_binary(sample.labels):
        msg = f"{sample.id}: y={sample.y} contradicts labels {sample.labels.to_strings()}"
        raise InconsistentScriptError(msg)
    if (sample.y == 0) != (content == answer):
        msg = f"{sample.id}: y={sample.y} but content {content!r} vs answer {answer!r}"
        raise InconsistentScriptError(msg)


def write_images(samples: Sequence[Sample], root: Path) -> int:
    """Write every distinct image once (augmented samples share theirs)."""
    written: set[str] = set()
    for sample in samples:
        if sample.image is None or sample.image_path in written:
            continue
        save_pgm(root / sample.image_path, sample.image.pixels)
        written.add(sample.image_path)
    return len(written)


def write_manifest(path: Path, samples: Sequence[Sample]) -> None:
    """Write one JSON object per line, in sample order."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for sample in samples:
            record = SampleRecord.from_sample(sample)
            f.write(json.dumps(record.model_dump(mode="json"), ensure_ascii=False) + "\n")


def read_manifest(
    path: Path,
    root: Path | None = None,
    load_images: bool = True,
    validate: bool = True,
    strip_chars: str = "",
) -> list[Sample]:
    """Read a manifest; images resolve against ``root`` (default: the manifest's folder).

    Validation aligns content and answer with ``strip_chars`` removed.

    Raises:
        InconsistentScriptError: If a line is malformed or fails validation.
    """
    root = root or path.parent
    cache: dict[str, GlyphImage] = {}
    samples: list[Sample] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = SampleRecord.model_validate_json(line)
        except ValidationError as e:
            msg = f"{path}:{lineno}: invalid manifest line: {e}"
            raise InconsistentScriptError(msg) from e

        image: GlyphImage | None = None
        if load_images:
            image = cache.get(record.image_path)
            if image is None:
                image = load_glyph_image(root / record.image_path, record.valid_width)
                cache[record.image_path] = image
        try:
            labels = LabelSeq.of(record.labels)
        except ValueError as e:
            msg = f"{path}:{lineno}: {e}"
            raise InconsistentScriptError(msg) from e

        sample = Sample(
            id=record.id,
            content=record.content,
            answer=record.answer,
            labels=labels,
            y=record.y,
            image=image,
            image_path=record.image_path,
            shard=record.shard,
            split=record.split,
        )
        if validate:
            check_sample(sample, strip_chars)
        samples.append(sample)
    logger.debug("Read %d samples from %s", len(samples), path)
    return samples


@dataclass
class SplitStats:
    split: str
    shard: str
    images: int
    samples: int
    right: int
    wrong: int

    @property
    def expansion(self) -> float:
        return self.samples / self.images if self.images else 0.0


def dataset_stats(samples: Sequence[Sample]) -> list[SplitStats]:
    """Per (split, shard) image and sample counts with the y=0:y=1 split."""
    groups: dict[tuple[str, str], list[Sample]] = {}
    for sample in samples:
        groups.setdefault((sample.split, sample.shard), []).append(sample)
    rows = []
    for (split, shard), group in sorted(groups.items()):
        wrong = sum(s.y for s in group)
        rows.append(
            SplitStats(
                split=split,
                shard=shard,
                images=len({s.image_path for s in group}),
                samples=len(group),
                right=len(group) - wrong,
                wrong=wrong,
            )
        )
    return rows


@dataclass
class Batch:
    """Stacked model inputs of a group of samples.

    Attributes:
        images: ``[B, H, max_width]`` pixels.
        valid_blocks: ``[B]`` non-padding pixel blocks per image.
        token_ids: ``[B, L_t]`` ``<BLK>`` + answer ids, right-padded with PAD.
        valid_tokens: ``[B]`` answer length + 1.
        label_ids: ``[B, L_t]`` gold label ids, ``IGNORE_LABEL`` on padding.
        targets: Content ids per sample (CTC targets).
        y: ``[B]`` binary results.
    """

    samples: list[Sample]
    images: np.ndarray
    valid_blocks: np.ndarray
    token_ids: np.ndarray
    valid_tokens: np.ndarray
    label_ids: np.ndarray
    targets: list[list[int]]
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.samples)


def collate(
    samples: Sequence[Sample], vocab: Vocabulary, geometry: GeometryConfig, max_answer_len: int
) -> Batch:
    """Stack samples into a batch.

    Raises:
        GeometryMismatchError: If an image is not ``img_height`` x ``max_width``.
        AnswerTooLongError: If an answer does not fit ``max_answer_len``.
    """
    expected = (geometry.img_height, geometry.max_width)
    images = []
    for sample in samples:
        assert sample.image is not None, f"{sample.id} has no image loaded"
        if sample.image.pixels.shape != expected:
            msg = f"{sample.id}: image shape {sample.image.pixels.shape}, expected {expected}"
            raise GeometryMismatchError(msg)
        images.append(sample.image.pixels)

    token_ids = np.stack([vocab.encode_answer(s.answer, max_answer_len) for s in samples])
    label_ids = np.full((len(samples), max_answer_len), IGNORE_LABEL, dtype=np.int64)
    for row, sample in enumerate(samples):
        label_ids[row, : len(sample.labels)] = sample.labels.to_ids()

    return Batch(
        samples=list(samples),
        images=np.stack(images).astype(np.float32),
        valid_blocks=np.array(
            [s.image.valid_blocks(geometry.block_width) for s in samples],  # type: ignore[union-attr]
            dtype=np.int64,
        ),
        token_ids=token_ids,
        valid_tokens=np.array([len(s.answer) + 1 for s in samples], dtype=np.int64),
        label_ids=label_ids,
        targets=[vocab.encode_text(s.content) for s in samples],
        y=np.array([s.y for s in samples], dtype=np.int64),
    )


def iter_batches(
    samples: Sequence[Sample],
    batch_size: int,
    vocab: Vocabulary,
    geometry: GeometryConfig,
    max_answer_len: int,
    rng: np.random.Generator | None = None,
) -> Iterator[Batch]:
    """Yield batches in order, or shuffled when ``rng`` is given."""
    order = np.arange(len(samples)) if rng is None else rng.permutation(len(samples))
    for start in range(0, len(order), batch_size):
        chunk = [samples[i] for i in order[start : start + batch_size]]
        yield collate(chunk, vocab, geometry, max_answer_len)
