"""Stage 2: train the multimodal correction model on labeled answers."""

import hashlib
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path

import numpy as np

from clozecheck.core.config import RunConfig
from clozecheck.core.types import Sample
from clozecheck.core.vocab import Vocabulary
from clozecheck.data.dataset import iter_batches
from clozecheck.evaluation.inference import predict_samples
from clozecheck.evaluation.metrics import binary_from_labels
from clozecheck.evaluation.metrics import binary_metrics
from clozecheck.evaluation.metrics import sequence_metrics
from clozecheck.models.fusion import MacModel
from clozecheck.models.fusion import mac_loss
from clozecheck.models.store import load_backbone
from clozecheck.nn.layers import Module
from clozecheck.nn.optim import AdamW
from clozecheck.nn.optim import cosine_anneal
from clozecheck.training.history import MetricsLog
from clozecheck.utils.seeding import derive_rng
from clozecheck.utils.seeding import stable_key


logger = logging.getLogger(__name__)


def parameter_checksum(module: Module) -> str:
    """SHA-256 over every parameter's name and bytes."""
    digest = hashlib.sha256()
    for name, p in module.named_parameters():
        digest.update(name.encode())
        digest.update(np.ascontiguousarray(p.data).tobytes())
    return digest.hexdigest()


@dataclass
class MacTrainer:
    """Cross-entropy training of the fusion stack.

    With ``ocr_checkpoint`` the pretrained backbone is loaded and frozen;
    without it the backbone is trained jointly from scratch.

    Attributes:
        cfg: Run configuration (``train.lr_mac``, ``train.epochs_mac``).
        vocab: Character inventory.
        model: Model to train; built from ``cfg`` when omitted.
        ocr_checkpoint: Pretrained OCR checkpoint supplying the backbone.
    """

    cfg: RunConfig
    vocab: Vocabulary
    model: MacModel | None = None
    ocr_checkpoint: Path | None = None
    optimizer: AdamW = field(init=False)
    steps_done: int = field(default=0, init=False)

    def __post_init__(self) -> None:
        if self.model is None:
            rng = derive_rng(self.cfg.seed, stable_key("mac-init"))
            self.model = MacModel(self.cfg.model, self.cfg.geometry, self.vocab, rng)
        if self.ocr_checkpoint is not None:
            load_backbone(self.model, self.ocr_checkpoint, self.cfg, self.vocab, freeze=True)
        t = self.cfg.train
        self.optimizer = AdamW(
            self.model.trainable_parameters(),
            lr=t.lr_mac,
            betas=t.betas,
            eps=t.eps,
            weight_decay=t.weight_decay,
        )

    @property
    def mac(self) -> MacModel:
        assert self.model is not None
        return self.model

    def train_epoch(self, samples: Sequence[Sample], epoch: int, total_steps: int) -> float:
        t = self.cfg.train
        rng = derive_rng(self.cfg.seed, stable_key("train-mac"), epoch)
        self.mac.train()
        losses: list[float] = []
        for batch in iter_batches(
            samples, t.batch_size, self.vocab, self.cfg.geometry, self.cfg.model.max_answer_len, rng
        ):
            scores = self.mac(batch.images, batch.valid_blocks, batch.token_ids, batch.valid_tokens)
            loss = mac_loss(scores, batch.label_ids)
            self.optimizer.zero_grad()
            loss.backward()
            self.optimizer.step(lr=cosine_anneal(self.steps_done, total_steps, t.lr_mac))
            self.steps_done += 1
            losses.append(loss.item())
        return float(np.mean(losses)) if losses else 0.0

    def evaluate(self, samples: Sequence[Sample]) -> dict[str, float]:
        """Span F1 and binary accuracy of the current model on ``samples``."""
        if not samples:
            return {"dev_seq_f1": 0.0, "dev_bin_accuracy": 0.0}
        pred = predict_samples(self.mac, samples, self.cfg, self.vocab)
        gold = [s.labels for s in samples]
        return {
            "dev_seq_f1": sequence_metrics(pred, gold).f1,
            "dev_bin_accuracy": binary_metrics(
                binary_from_labels(pred), [s.y for s in samples]
            ).accuracy,
        }

    def fit(
        self,
        train: Sequence[Sample],
        dev: Sequence[Sample] = (),
        log: MetricsLog | None = None,
        epochs: int | None = None,
    ) -> MetricsLog:
        """Train for ``epochs`` (default ``train.epochs_mac``).

        Records ``{epoch, train_loss, dev_seq_f1, dev_bin_accuracy}`` per epoch.
        """
        log = log or MetricsLog()
        epochs = self.cfg.train.epochs_mac if epochs is None else epochs
        total_steps = epochs * math.ceil(len(train) / self.cfg.train.batch_size)
        frozen = self.mac.image_encoder.backbone_frozen
        logger.info(
            "Training MAC on %d samples for %d epochs (backbone %s)",
            len(train),
            epochs,
            "frozen" if frozen else "trainable",
        )
        for epoch in range(1, epochs + 1):
            train_loss = self.train_epoch(train, epoch, total_steps)
            log.append({"epoch": epoch, "train_loss": train_loss, **self.evaluate(dev)})
        return log
