"""Command implementations behind the CLI.

Every ``cmd_*`` takes a validated ``RunConfig``, writes its artifacts under
``run_dir`` together with a ``config.yaml`` snapshot and returns what it
produced, so the functions are usable without the command line.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from clozecheck.core.config import RunConfig
from clozecheck.core.types import MetricsReport
from clozecheck.core.types import Sample
from clozecheck.core.vocab import ConfusionSet
from clozecheck.core.vocab import Vocabulary
from clozecheck.core.vocab import strip_punctuation
from clozecheck.data.augment import AugmentStats
from clozecheck.data.augment import augment
from clozecheck.data.dataset import SplitStats
from clozecheck.data.dataset import dataset_stats
from clozecheck.data.dataset import read_manifest
from clozecheck.data.dataset import write_images
from clozecheck.data.dataset import write_manifest
from clozecheck.data.generator import SPLITS
from clozecheck.data.generator import CorpusGenerator
from clozecheck.evaluation.attention import collect_attention
from clozecheck.evaluation.attention import export_attention
from clozecheck.evaluation.inference import decode_samples
from clozecheck.evaluation.inference import predict_samples
from clozecheck.evaluation.metrics import binary_from_labels
from clozecheck.evaluation.metrics import build_report
from clozecheck.evaluation.metrics import corpus_cer
from clozecheck.evaluation.metrics import ocr_pipeline_correct
from clozecheck.evaluation.report import error_cases
from clozecheck.evaluation.report import write_jsonl
from clozecheck.evaluation.report import write_reports
from clozecheck.exceptions import ConfigError
from clozecheck.exceptions import GeometryMismatchError
from clozecheck.imaging.glyphs import pad_to_width
from clozecheck.imaging.pgm import load_glyph_image
from clozecheck.models.fusion import predict_from_scores
from clozecheck.models.store import load_mac
from clozecheck.models.store import load_ocr
from clozecheck.models.store import save_model
from clozecheck.nn.tensor import no_grad
from clozecheck.training.history import MetricsLog
from clozecheck.training.mac import MacTrainer
from clozecheck.training.mac import parameter_checksum
from clozecheck.training.ocr import OcrTrainer


logger = logging.getLogger(__name__)

OCR_SYSTEM = "ocr-pipeline"
MAC_SYSTEM = "mac"


@dataclass(frozen=True)
class RunPaths:
    """Artifact locations of one run.

    The corpus lives in ``run_dir/data`` unless ``data.dir`` points elsewhere;
    the OCR checkpoint defaults to ``run_dir/ocr.ckpt`` unless
    ``train.ocr_checkpoint`` is set. Ablation variants use both to share
    the base run's corpus and backbone. Manifests are validated after
    removing ``strip_chars``.
    """

    root: Path
    data: Path
    ocr_checkpoint: Path
    strip_chars: str = ""

    @classmethod
    def of(cls, cfg: RunConfig) -> "RunPaths":
        root = cfg.path
        data = Path(cfg.data.dir) if cfg.data.dir else root / "data"
        ocr = Path(cfg.train.ocr_checkpoint) if cfg.train.ocr_checkpoint else root / "ocr.ckpt"
        return cls(root=root, data=data, ocr_checkpoint=ocr, strip_chars=cfg.data.strip_chars)

    def manifest(self, split: str) -> Path:
        return self.data / f"{split}.jsonl"

    @property
    def vocab(self) -> Path:
        return self.data / "vocab.txt"

    @property
    def confusion(self) -> Path:
        return self.data / "confusion.tsv"

    @property
    def mac_checkpoint(self) -> Path:
        return self.root / "mac.ckpt"

    @property
    def pretrain_log(self) -> Path:
        return self.root / "pretrain_metrics.jsonl"

    @property
    def train_log(self) -> Path:
        return self.root / "train_metrics.jsonl"

    @property
    def eval_dir(self) -> Path:
        return self.root / "eval"

    @property
    def attention_dir(self) -> Path:
        return self.root / "attention"

    @property
    def ablation_dir(self) -> Path:
        return self.root / "ablations"


def snapshot(cfg: RunConfig) -> RunPaths:
    paths = RunPaths.of(cfg)
    cfg.snapshot(paths.root / "config.yaml")
    return paths


def build_resources(cfg: RunConfig) -> tuple[Vocabulary, ConfusionSet]:
    """Vocabulary and confusion set from the configured files or the synthetic defaults."""
    data = cfg.data
    vocab = Vocabulary.load(Path(data.vocab_path)) if data.vocab_path else Vocabulary.synthetic(
        data.vocab_size
    )
    if data.confusion_path:
        confusion = ConfusionSet.load(Path(data.confusion_path))
    else:
        confusion = ConfusionSet.synthetic(vocab, data.family_size, seed=cfg.seed)
    confusion.validate(vocab)
    return vocab, confusion


def load_resources(paths: RunPaths) -> tuple[Vocabulary, ConfusionSet]:
    """Vocabulary and confusion set written by ``gen-data``."""
    if not paths.vocab.exists():
        msg = f"No dataset at {paths.data}; run gen-data first"
        raise ConfigError(msg)
    return Vocabulary.load(paths.vocab), ConfusionSet.load(paths.confusion)


def load_split(paths: RunPaths, split: str, load_images: bool = True) -> list[Sample]:
    path = paths.manifest(split)
    if not path.exists():
        msg = f"Manifest {path} not found; run gen-data first"
        raise ConfigError(msg)
    return read_manifest(
        path, root=paths.data, load_images=load_images, strip_chars=paths.strip_chars
    )


def cmd_gen_data(cfg: RunConfig) -> dict[str, Any]:
    """Generate, augment (train only) and write the corpus.

    Returns:
        Sample counts per split and the augmentation statistics.
    """
    paths = snapshot(cfg)
    vocab, confusion = build_resources(cfg)
    splits = CorpusGenerator.from_config(cfg, vocab, confusion).generate()
    originals = [s for split in SPLITS for s in splits[split]]

    stats = AugmentStats()
    if cfg.augment.generates_negatives:
        splits["train"], stats = augment(
            splits["train"], cfg.augment, confusion, vocab, cfg.seed, cfg.data.strip_chars
        )

    paths.data.mkdir(parents=True, exist_ok=True)
    images = write_images(originals, paths.data)
    for split in SPLITS:
        write_manifest(paths.manifest(split), splits[split])
    vocab.save(paths.vocab)
    confusion.save(paths.confusion)
    logger.info("Wrote %d images to %s", images, paths.data)
    return {"counts": {split: len(splits[split]) for split in SPLITS}, "augment": stats}


def cmd_pretrain(cfg: RunConfig) -> MetricsLog:
    """Stage 1: train the OCR model and save ``ocr.ckpt``."""
    paths = snapshot(cfg)
    vocab, _ = load_resources(paths)
    train = load_split(paths, "train")
    dev = load_split(paths, "dev")
    trainer = OcrTrainer(cfg, vocab)
    log = trainer.fit(train, dev, MetricsLog(paths.pretrain_log))
    last = log.records[-1] if log.records else {}
    save_model(
        paths.ocr_checkpoint,
        trainer.ocr,
        cfg,
        "ocr",
        vocab,
        epoch=last.get("epoch", 0),
        dev_cer=last.get("dev_cer"),
    )
    return log


def cmd_train_mac(cfg: RunConfig) -> MetricsLog:
    """Stage 2: train MAC, on the frozen pretrained backbone unless ``train.pretrain`` is off.

    Raises:
        CheckpointCorruptError: If pretraining is on and the OCR checkpoint is unreadable.
        GeometryMismatchError: If the OCR checkpoint was built for another geometry.
    """
    paths = snapshot(cfg)
    vocab, _ = load_resources(paths)
    train = load_split(paths, "train")
    dev = load_split(paths, "dev")
    ocr_checkpoint = paths.ocr_checkpoint if cfg.train.pretrain else None
    trainer = MacTrainer(cfg, vocab, ocr_checkpoint=ocr_checkpoint)

    frozen_before = parameter_checksum(trainer.mac.backbone) if ocr_checkpoint else None
    log = trainer.fit(train, dev, MetricsLog(paths.train_log))
    if frozen_before is not None and parameter_checksum(trainer.mac.backbone) != frozen_before:
        msg = "Frozen backbone changed during training"
        raise RuntimeError(msg)

    last = log.records[-1] if log.records else {}
    save_model(
        paths.mac_checkpoint,
        trainer.mac,
        cfg,
        "mac",
        vocab,
        epoch=last.get("epoch", 0),
        pretrained=cfg.train.pretrain,
    )
    return log


def evaluate_ocr(
    cfg: RunConfig, vocab: Vocabulary, test: list[Sample], checkpoint: Path
) -> tuple[MetricsReport, list[str], list[int]]:
    model = load_ocr(checkpoint, cfg, vocab)
    decoded = decode_samples(model, test, cfg, vocab)
    strip = cfg.data.strip_chars
    ocr_y = [ocr_pipeline_correct(d, s.answer, strip) for d, s in zip(decoded, test, strict=True)]
    report = build_report(
        OCR_SYSTEM,
        ocr_y,
        [s.y for s in test],
        cer_value=corpus_cer(decoded, [s.content for s in test]),
        tags={"checkpoint": str(checkpoint)},
    )
    return report, decoded, ocr_y


def cmd_eval(
    cfg: RunConfig,
    mac_checkpoint: Path | None = None,
    ocr_checkpoint: Path | None = None,
    tags: dict[str, str] | None = None,
) -> list[MetricsReport]:
    """Score the OCR pipeline baseline and MAC on the (un-augmented) test manifest.

    The baseline is skipped with a warning when no OCR checkpoint exists.
    """
    paths = snapshot(cfg)
    vocab, _ = load_resources(paths)
    test = load_split(paths, "test")
    mac_checkpoint = mac_checkpoint or paths.mac_checkpoint
    ocr_checkpoint = ocr_checkpoint or paths.ocr_checkpoint

    reports: list[MetricsReport] = []
    decoded: list[str] | None = None
    ocr_y: list[int] | None = None
    if ocr_checkpoint.exists():
        ocr_report, decoded, ocr_y = evaluate_ocr(cfg, vocab, test, ocr_checkpoint)
        ocr_report.tags.update(tags or {})
        reports.append(ocr_report)
    else:
        logger.warning("No OCR checkpoint at %s; skipping the OCR pipeline baseline", ocr_checkpoint)

    mac = load_mac(mac_checkpoint, cfg, vocab)
    labels = predict_samples(mac, test, cfg, vocab)
    mac_y = binary_from_labels(labels)
    reports.append(
        build_report(
            MAC_SYSTEM,
            mac_y,
            [s.y for s in test],
            pred_labels=labels,
            gold_labels=[s.labels for s in test],
            tags={"checkpoint": str(mac_checkpoint), **(tags or {})},
        )
    )

    write_reports(paths.eval_dir, reports, title=f"{len(test)} test samples")
    write_jsonl(paths.eval_dir / "errors.jsonl", error_cases(test, labels, mac_y, decoded, ocr_y))
    for report in reports:
        logger.info(
            "%s: binary acc %.4f, P %.4f, R %.4f", report.system, report.bin_accuracy,
            report.bin_precision, report.bin_recall,
        )
    return reports


def load_line_image(path: Path, cfg: RunConfig) -> tuple[np.ndarray, int]:
    """A single line image padded to ``max_width`` and its valid block count.

    Raises:
        GeometryMismatchError: If the image height differs from ``img_height``.
        TooWideError: If the image is wider than ``max_width``.
    """
    image = load_glyph_image(path)
    g = cfg.geometry
    if image.height != g.img_height:
        msg = f"{path}: image height {image.height} differs from img_height {g.img_height}"
        raise GeometryMismatchError(msg)
    image = pad_to_width(image, g.max_width)
    return image.pixels[None, :, :], image.valid_blocks(g.block_width)


def cmd_correct(
    cfg: RunConfig, image: Path, answer: str, checkpoint: Path | None = None
) -> dict[str, Any]:
    """Correct one handwritten answer.

    Returns:
        ``{"labels": [...], "binary": 0 | 1}`` for the stripped answer.
    """
    paths = RunPaths.of(cfg)
    vocab, _ = load_resources(paths)
    model = load_mac(checkpoint or paths.mac_checkpoint, cfg, vocab)
    pixels, valid_blocks = load_line_image(image, cfg)
    answer = strip_punctuation(answer, cfg.data.strip_chars)
    token_ids, valid_tokens = model.encode_answers([answer])
    with no_grad():
        scores = model(pixels, np.array([valid_blocks]), token_ids, valid_tokens)
    prediction = predict_from_scores(scores, valid_tokens)
    return {"labels": prediction.labels[0].to_strings(), "binary": prediction.binary[0]}


def cmd_viz_attn(
    cfg: RunConfig,
    sample_ids: list[str] | None = None,
    split: str = "test",
    limit: int = 1,
    checkpoint: Path | None = None,
) -> list[Path]:
    """Export attention maps of chosen samples (default: the first ``limit`` of ``split``)."""
    paths = snapshot(cfg)
    vocab, _ = load_resources(paths)
    samples = load_split(paths, split)
    if sample_ids:
        by_id = {s.id: s for s in samples}
        missing = [i for i in sample_ids if i not in by_id]
        if missing:
            msg = f"Unknown sample ids in {split}: {', '.join(missing)}"
            raise ConfigError(msg)
        chosen = [by_id[i] for i in sample_ids]
    else:
        chosen = samples[:limit]

    model = load_mac(checkpoint or paths.mac_checkpoint, cfg, vocab)
    written: list[Path] = []
    for sample in chosen:
        maps = collect_attention(model, sample)
        written.extend(export_attention(paths.attention_dir / sample.id, maps))
    return written


def cmd_stats(cfg: RunConfig) -> list[SplitStats]:
    """Per split and shard: images, samples, y=0:y=1 and expansion."""
    paths = RunPaths.of(cfg)
    rows: list[SplitStats] = []
    for split in SPLITS:
        rows.extend(dataset_stats(load_split(paths, split, load_images=False)))
    return rows

