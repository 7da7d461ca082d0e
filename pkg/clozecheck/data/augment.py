"""Negative sample augmentation on the answer side.

Every original keeps its image and content. For each edit family a random
number of rounds runs; each round edits a fresh copy of the original answer
once and relabels it against the unchanged content.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace

import numpy as np

from clozecheck.core.alignment import derive_labels
from clozecheck.core.config import AugmentConfig
from clozecheck.core.types import Sample
from clozecheck.core.vocab import ConfusionSet
from clozecheck.core.vocab import Vocabulary
from clozecheck.core.vocab import edit_chars
from clozecheck.core.vocab import strip_punctuation
from clozecheck.core.vocab import substitute_char
from clozecheck.utils.seeding import derive_rng
from clozecheck.utils.seeding import stable_key


logger = logging.getLogger(__name__)

EDIT_FAMILIES = ("sub", "del", "ins")


@dataclass
class AugmentStats:
    """Bookkeeping of one augmentation pass."""

    originals: int = 0
    generated: Counter[str] = field(default_factory=Counter)
    skipped_empty: int = 0
    reverted: int = 0

    @property
    def total_generated(self) -> int:
        return sum(self.generated.values())


def draw_rounds(max_rounds: int, rng: np.random.Generator) -> int:
    """Round count for one family: uniform over [1, max], or 0 when disabled."""
    if max_rounds <= 0:
        return 0
    return int(rng.integers(1, max_rounds + 1))


def edit_answer(
    answer: str,
    family: str,
    confusion: ConfusionSet,
    vocab: Vocabulary,
    rng: np.random.Generator,
    strip_chars: str = "",
) -> str | None:
    """Apply one random edit of ``family`` to ``answer``.

    Inserted and substituted characters never come from ``strip_chars``.
    Returns None when the family cannot act on the answer (substituting or
    deleting in an empty answer).
    """
    if family == "ins":
        chars = edit_chars(vocab, strip_chars)
        j = int(rng.integers(len(answer) + 1))
        return answer[:j] + chars[int(rng.integers(len(chars)))] + answer[j:]
    if not answer:
        return None
    j = int(rng.integers(len(answer)))
    if family == "sub":
        sub = substitute_char(answer[j], confusion, vocab, rng, strip_chars)
        return answer[:j] + sub + answer[j + 1 :]
    return answer[:j] + answer[j + 1 :]


def augment_sample(
    sample: Sample,
    cfg: AugmentConfig,
    confusion: ConfusionSet,
    vocab: Vocabulary,
    seed: int,
    stats: AugmentStats | None = None,
    strip_chars: str = "",
) -> list[Sample]:
    """Negatives generated from one original (the original itself excluded)."""
    stats = stats if stats is not None else AugmentStats()
    rng = derive_rng(seed, stable_key(sample.id))
    limits = {"sub": cfg.max_sub_rounds, "del": cfg.max_del_rounds, "ins": cfg.max_ins_rounds}

    answer = strip_punctuation(sample.answer, strip_chars)
    content = strip_punctuation(sample.content, strip_chars)

    out: list[Sample] = []
    for family in EDIT_FAMILIES:
        for round_index in range(draw_rounds(limits[family], rng)):
            new_answer = edit_answer(answer, family, confusion, vocab, rng, strip_chars)
            if new_answer is None:
                stats.skipped_empty += 1
                continue
            if new_answer == content:
                stats.reverted += 1
                continue
            labels = derive_labels(content, new_answer)
            out.append(
                replace(
                    sample,
                    id=f"{sample.id}-{family}{round_index}",
                    answer=new_answer,
                    labels=labels,
                    y=1,
                )
            )
            stats.generated[family] += 1
    return out


def augment(
    dataset: list[Sample],
    cfg: AugmentConfig,
    confusion: ConfusionSet,
    vocab: Vocabulary,
    seed: int = 0,
    strip_chars: str = "",
) -> tuple[list[Sample], AugmentStats]:
    """Expand ``dataset`` with answer-side negatives.

    Output order is each original followed by its negatives. Duplicated
    negatives are kept. The seed comes from ``cfg.seed`` when set.

    Args:
        dataset: Original samples (content, answer, labels and y populated).
        cfg: Round limits per edit family.
        confusion: Source of shape-similar substitutes.
        vocab: Source of inserted characters and the substitution fallback.
        seed: Run seed, used when ``cfg.seed`` is None.
        strip_chars: Characters removed before alignment; edits never insert them.

    Returns:
        The expanded sample list and the pass statistics.
    """
    seed = seed if cfg.seed is None else cfg.seed
    stats = AugmentStats(originals=len(dataset))
    out: list[Sample] = []
    for sample in dataset:
        out.append(sample)
        out.extend(augment_sample(sample, cfg, confusion, vocab, seed, stats, strip_chars))

    if stats.skipped_empty or stats.reverted:
        logger.warning(
            "Augmentation skipped %d edits on empty answers and discarded %d edits "
            "that reverted the answer to the content",
            stats.skipped_empty,
            stats.reverted,
        )
    logger.info(
        "Augmented %d originals into %d samples (%s)",
        stats.originals,
        len(out),
        ", ".join(f"{k}={stats.generated[k]}" for k in EDIT_FAMILIES),
    )
    return out, stats
