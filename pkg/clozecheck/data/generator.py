"""Synthetic correction corpus: answers, student errors, shards and splits.

Splitting happens at the image level. Train shards, dev and test are drawn
from disjoint seed streams and their ids carry the split name, so no image
is shared between splits and augmentation later only touches ``train``.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from clozecheck.core.alignment import derive_labels
from clozecheck.core.alignment import reduce_binary
from clozecheck.core.config import RunConfig
from clozecheck.core.config import ShardConfig
from clozecheck.core.types import GlyphStyle
from clozecheck.core.types import Sample
from clozecheck.core.vocab import ConfusionSet
from clozecheck.core.vocab import Vocabulary
from clozecheck.core.vocab import edit_chars
from clozecheck.core.vocab import strip_punctuation
from clozecheck.core.vocab import substitute_char
from clozecheck.exceptions import ConfigError
from clozecheck.exceptions import TooWideError
from clozecheck.imaging.glyphs import GlyphBank
from clozecheck.imaging.glyphs import pad_to_width
from clozecheck.utils.seeding import derive_rng
from clozecheck.utils.seeding import stable_key


logger = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")
EVAL_SHARD = "platform"


def sample_style(shard: ShardConfig, rng: np.random.Generator, style_id: int = 0) -> GlyphStyle:
    """Draw a writer style within the jitter bounds of ``shard``."""
    low, high = shard.width_scale
    return GlyphStyle(
        style_id=style_id,
        x_shift=int(rng.integers(-shard.max_shift, shard.max_shift + 1)),
        y_shift=int(rng.integers(-shard.max_shift, shard.max_shift + 1)),
        thickness=int(rng.integers(0, shard.max_thickness + 1)),
        width_scale=float(rng.uniform(low, high)),
    )


def student_error(
    answer: str,
    kind: str,
    confusion: ConfusionSet,
    vocab: Vocabulary,
    rng: np.random.Generator,
    strip_chars: str = "",
) -> str:
    """What a student wrote instead of ``answer``, using one edit of ``kind``.

    Deletions keep at least one character so the line can still be drawn.
    Characters of ``strip_chars`` are never introduced.
    """
    if kind == "del" and len(answer) < 2:
        kind = "sub"
    if kind == "sub":
        j = int(rng.integers(len(answer)))
        sub = substitute_char(answer[j], confusion, vocab, rng, strip_chars)
        return answer[:j] + sub + answer[j + 1 :]
    if kind == "del":
        j = int(rng.integers(len(answer)))
        return answer[:j] + answer[j + 1 :]
    chars = edit_chars(vocab, strip_chars)
    j = int(rng.integers(len(answer) + 1))
    return answer[:j] + chars[int(rng.integers(len(chars)))] + answer[j:]


@dataclass
class CorpusGenerator:
    """Draws the original (pre-augmentation) samples of every split.

    Attributes:
        cfg: Run configuration; ``data`` and ``geometry`` drive generation.
        vocab: Character inventory.
        confusion: Look-alike families used for sloppy glyphs and student errors.
        bank: Glyph grids matching ``confusion``.
    """

    cfg: RunConfig
    vocab: Vocabulary
    confusion: ConfusionSet
    bank: GlyphBank

    @classmethod
    def from_config(
        cls, cfg: RunConfig, vocab: Vocabulary, confusion: ConfusionSet
    ) -> "CorpusGenerator":
        if len(edit_chars(vocab, cfg.data.strip_chars)) < 2:
            msg = f"strip_chars {cfg.data.strip_chars!r} must leave at least two characters"
            raise ConfigError(msg)
        bank = GlyphBank(vocab, confusion, geometry=cfg.geometry, seed=cfg.seed)
        return cls(cfg, vocab, confusion, bank)

    def generate(self) -> dict[str, list[Sample]]:
        """Original samples of train (all non-excluded shards), dev and test."""
        data = self.cfg.data
        splits: dict[str, list[Sample]] = {"train": []}
        for name, shard in data.shards.items():
            if name in data.exclude_shards:
                logger.info("Skipping excluded shard %s", name)
                continue
            splits["train"].extend(self.generate_shard("train", name, shard))
        splits["dev"] = self.generate_shard("dev", EVAL_SHARD, data.dev)
        splits["test"] = self.generate_shard("test", EVAL_SHARD, data.test)
        for split, samples in splits.items():
            wrong = sum(s.y for s in samples)
            logger.info("%s: %d samples (%d with student errors)", split, len(samples), wrong)
        return splits

    def generate_shard(self, split: str, name: str, shard: ShardConfig) -> list[Sample]:
        """Render ``shard.count`` samples; an exact ``error_ratio`` share is wrong."""
        split_rng = derive_rng(self.cfg.seed, stable_key(split), stable_key(name))
        n_wrong = round(shard.count * shard.error_ratio)
        wrong = set(split_rng.permutation(shard.count)[:n_wrong].tolist())

        def make(index: int) -> Sample:
            return self.make_sample(split, name, shard, index, index in wrong)

        if self.cfg.data.workers > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.data.workers) as pool:
                return list(pool.map(make, range(shard.count)))
        return [make(i) for i in range(shard.count)]

    def make_sample(
        self, split: str, shard_name: str, shard: ShardConfig, index: int, with_error: bool
    ) -> Sample:
        """Build one sample from its own derived generator.

        The ground answer is drawn first; a wrong sample's image shows the
        student's erroneous content, a right one shows the answer itself.
        Lines that come out wider than ``max_width`` are redrawn.

        Raises:
            TooWideError: If no attempt fits into ``max_width``.
        """
        geometry = self.cfg.geometry
        sample_id = f"{split}-{shard_name}-{index:05d}"
        last_error: TooWideError | None = None
        for attempt in range(self.cfg.data.max_render_attempts):
            rng = derive_rng(
                self.cfg.seed, stable_key(split), stable_key(shard_name), index, attempt
            )
            answer = self.sample_text(rng)
            content = answer
            if with_error:
                kind = self.sample_error_kind(rng)
                content = student_error(
                    answer, kind, self.confusion, self.vocab, rng, self.cfg.data.strip_chars
                )

            style = sample_style(shard, rng, style_id=index)
            image, _ = self.bank.render_line(
                content, style, shard.ligature_prob, rng, sloppy_prob=shard.sloppy_prob
            )
            try:
                padded = pad_to_width(image, geometry.max_width)
            except TooWideError as e:
                last_error = e
                logger.debug("%s attempt %d too wide: %s", sample_id, attempt, e)
                continue

            strip = self.cfg.data.strip_chars
            labels = derive_labels(
                strip_punctuation(content, strip), strip_punctuation(answer, strip)
            )
            return Sample(
                id=sample_id,
                content=content,
                answer=answer,
                labels=labels,
                y=reduce_binary(labels),
                image=padded,
                image_path=f"images/{sample_id}.pgm",
                shard=shard_name,
                split=split,
            )
        assert last_error is not None
        raise last_error

    def sample_text(self, rng: np.random.Generator) -> str:
        """Ground answer of uniform length over the non-stripped characters."""
        data = self.cfg.data
        chars = edit_chars(self.vocab, data.strip_chars)
        length = int(rng.integers(data.min_answer_len, data.max_answer_len + 1))
        picks = rng.integers(len(chars), size=length)
        return "".join(chars[i] for i in picks)

    def sample_error_kind(self, rng: np.random.Generator) -> str:
        kinds = list(self.cfg.data.error_mix)
        weights = np.array([self.cfg.data.error_mix[k] for k in kinds], dtype=np.float64)
        return kinds[int(rng.choice(len(kinds), p=weights / weights.sum()))]
