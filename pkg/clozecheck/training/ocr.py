"""Stage 1: pretrain the backbone and CTC head on line transcription."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field

import numpy as np

from clozecheck.core.config import RunConfig
from clozecheck.core.types import Sample
from clozecheck.core.vocab import Vocabulary
from clozecheck.data.dataset import iter_batches
from clozecheck.evaluation.inference import decode_samples
from clozecheck.evaluation.metrics import corpus_cer
from clozecheck.models.backbone import OcrModel
from clozecheck.models.ctc import ctc_loss
from clozecheck.nn.optim import AdamW
from clozecheck.nn.optim import cosine_anneal
from clozecheck.training.history import MetricsLog
from clozecheck.utils.seeding import derive_rng
from clozecheck.utils.seeding import stable_key


logger = logging.getLogger(__name__)


def unique_images(samples: Sequence[Sample]) -> list[Sample]:
    """One sample per image; augmented negatives share their original's image and content."""
    seen: set[str] = set()
    out: list[Sample] = []
    for sample in samples:
        key = sample.image_path or sample.id
        if key not in seen:
            seen.add(key)
            out.append(sample)
    return out


@dataclass
class OcrTrainer:
    """CTC training with AdamW and a per-step cosine learning-rate schedule.

    Attributes:
        cfg: Run configuration (``train.lr_pretrain``, ``train.epochs_pretrain``).
        vocab: Character inventory; the CTC blank is ``vocab.blank_id``.
        model: Model to train; built from ``cfg`` when omitted.
    """

    cfg: RunConfig
    vocab: Vocabulary
    model: OcrModel | None = None
    optimizer: AdamW = field(init=False)
    steps_done: int = field(default=0, init=False)

    def __post_init__(self) -> None:
        if self.model is None:
            rng = derive_rng(self.cfg.seed, stable_key("ocr-init"))
            self.model = OcrModel(self.cfg.model, self.cfg.geometry, self.vocab, rng)
        t = self.cfg.train
        self.optimizer = AdamW(
            self.model.trainable_parameters(),
            lr=t.lr_pretrain,
            betas=t.betas,
            eps=t.eps,
            weight_decay=t.weight_decay,
        )

    @property
    def ocr(self) -> OcrModel:
        assert self.model is not None
        return self.model

    def train_epoch(self, samples: Sequence[Sample], epoch: int, total_steps: int) -> float:
        """One pass over ``samples`` in a seeded shuffled order; returns the mean loss."""
        t = self.cfg.train
        rng = derive_rng(self.cfg.seed, stable_key("pretrain"), epoch)
        self.ocr.train()
        losses: list[float] = []
        for batch in iter_batches(
            samples, t.batch_size, self.vocab, self.cfg.geometry, self.cfg.model.max_answer_len, rng
        ):
            log_probs = self.ocr(batch.images)
            loss = ctc_loss(
                log_probs, batch.targets, self.vocab.blank_id, input_lengths=batch.valid_blocks
            )
            self.optimizer.zero_grad()
            loss.backward()
            self.optimizer.step(lr=cosine_anneal(self.steps_done, total_steps, t.lr_pretrain))
            self.steps_done += 1
            losses.append(loss.item())
        return float(np.mean(losses)) if losses else 0.0

    def evaluate(self, samples: Sequence[Sample]) -> float:
        """Corpus CER of greedy transcriptions against the written content."""
        if not samples:
            return 0.0
        decoded = decode_samples(self.ocr, samples, self.cfg, self.vocab)
        return corpus_cer(decoded, [s.content for s in samples])

    def fit(
        self,
        train: Sequence[Sample],
        dev: Sequence[Sample] = (),
        log: MetricsLog | None = None,
        epochs: int | None = None,
    ) -> MetricsLog:
        """Train for ``epochs`` (default ``train.epochs_pretrain``) on distinct images.

        Records ``{epoch, train_loss, dev_cer}`` per epoch.
        """
        log = log or MetricsLog()
        epochs = self.cfg.train.epochs_pretrain if epochs is None else epochs
        train = unique_images(train)
        dev = unique_images(dev)
        per_epoch = math.ceil(len(train) / self.cfg.train.batch_size)
        total_steps = epochs * per_epoch
        logger.info("Pretraining on %d images for %d epochs", len(train), epochs)
        for epoch in range(1, epochs + 1):
            train_loss = self.train_epoch(train, epoch, total_steps)
            log.append({"epoch": epoch, "train_loss": train_loss, "dev_cer": self.evaluate(dev)})
        return log
