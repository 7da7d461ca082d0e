"""Model checkpoints: headers, compatibility checks and loading into models."""

import logging
from pathlib import Path
from typing import Any
from typing import Literal

import numpy as np

from clozecheck.core.config import RunConfig
from clozecheck.core.vocab import Vocabulary
from clozecheck.exceptions import CheckpointCorruptError
from clozecheck.exceptions import GeometryMismatchError
from clozecheck.models.backbone import OcrModel
from clozecheck.models.fusion import MacModel
from clozecheck.nn.checkpoint import load_checkpoint
from clozecheck.nn.checkpoint import save_checkpoint
from clozecheck.nn.layers import Module


logger = logging.getLogger(__name__)

ModelKind = Literal["ocr", "mac"]

BACKBONE_FIELDS = ("conv_blocks", "channels", "hidden_size")


def checkpoint_header(
    cfg: RunConfig,
    kind: ModelKind,
    vocab: Vocabulary,
    **extra: Any,
) -> dict[str, Any]:
    """Header stored next to the weights; ``extra`` adds run bookkeeping (epoch, rng state)."""
    return {
        "kind": kind,
        "config_hash": cfg.config_hash(),
        "geometry": cfg.geometry.model_dump(mode="json"),
        "model": cfg.model.model_dump(mode="json"),
        "vocab_size": vocab.num_chars,
        "seed": cfg.seed,
        **extra,
    }


def save_model(
    path: Path, model: Module, cfg: RunConfig, kind: ModelKind, vocab: Vocabulary, **extra: Any
) -> None:
    save_checkpoint(path, model.state_dict(), checkpoint_header(cfg, kind, vocab, **extra))
    logger.info("Saved %s checkpoint to %s", kind, path)


def check_header(
    header: dict[str, Any],
    cfg: RunConfig,
    vocab: Vocabulary,
    path: Path,
    backbone_only: bool = False,
) -> None:
    """Refuse checkpoints built for another geometry, model or vocabulary.

    With ``backbone_only`` only the backbone dimensions of the model section
    must agree, which is all an OCR checkpoint depends on.

    Raises:
        GeometryMismatchError: If geometry, model dimensions or vocabulary size differ.
        CheckpointCorruptError: If the header lacks the required fields.
    """
    try:
        geometry = header["geometry"]
        model = header["model"]
        vocab_size = header["vocab_size"]
    except (KeyError, TypeError) as e:
        msg = f"{path}: checkpoint header is missing {e}"
        raise CheckpointCorruptError(msg) from e

    expected = cfg.geometry.model_dump(mode="json")
    if geometry != expected:
        msg = f"{path}: checkpoint geometry {geometry} differs from configured {expected}"
        raise GeometryMismatchError(msg)

    ours = cfg.model.model_dump(mode="json")
    fields = BACKBONE_FIELDS if backbone_only else tuple(ours)
    differing = [f for f in fields if model.get(f) != ours[f]]
    if differing:
        msg = f"{path}: checkpoint model differs from configuration in {', '.join(differing)}"
        raise GeometryMismatchError(msg)

    if vocab_size != vocab.num_chars:
        msg = f"{path}: checkpoint has {vocab_size} characters, vocabulary has {vocab.num_chars}"
        raise GeometryMismatchError(msg)


def read_model_checkpoint(
    path: Path, kind: ModelKind, cfg: RunConfig, vocab: Vocabulary
) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    header, tensors = load_checkpoint(path)
    if header.get("kind") != kind:
        msg = f"{path}: expected a {kind} checkpoint, found {header.get('kind')!r}"
        raise CheckpointCorruptError(msg)
    check_header(header, cfg, vocab, path, backbone_only=kind == "ocr")
    return header, tensors


def load_weights(
    module: Module, tensors: dict[str, np.ndarray], path: Path, prefix: str = ""
) -> None:
    try:
        module.load_state_dict(tensors, prefix=prefix)
    except (KeyError, ValueError) as e:
        msg = f"{path}: {e}"
        raise CheckpointCorruptError(msg) from e


def load_ocr(path: Path, cfg: RunConfig, vocab: Vocabulary) -> OcrModel:
    """Rebuild an OCR model from ``path``.

    Raises:
        GeometryMismatchError: If the checkpoint was built for another configuration.
        CheckpointCorruptError: If the file cannot be decoded or lacks weights.
    """
    _, tensors = read_model_checkpoint(path, "ocr", cfg, vocab)
    model = OcrModel(cfg.model, cfg.geometry, vocab, np.random.default_rng(cfg.seed))
    load_weights(model, tensors, path)
    model.eval()
    return model


def load_backbone(
    model: MacModel, path: Path, cfg: RunConfig, vocab: Vocabulary, freeze: bool = True
) -> None:
    """Copy the backbone of an OCR checkpoint into ``model`` and optionally freeze it."""
    _, tensors = read_model_checkpoint(path, "ocr", cfg, vocab)
    load_weights(model.backbone, tensors, path, prefix="backbone.")
    if freeze:
        model.backbone.freeze()
        model.backbone.eval()
    logger.info("Loaded backbone from %s (frozen=%s)", path, freeze)


def load_mac(path: Path, cfg: RunConfig, vocab: Vocabulary) -> MacModel:
    """Rebuild a MAC model from ``path``.

    Raises:
        GeometryMismatchError: If the checkpoint was built for another configuration.
        CheckpointCorruptError: If the file cannot be decoded or lacks weights.
    """
    _, tensors = read_model_checkpoint(path, "mac", cfg, vocab)
    model = MacModel(cfg.model, cfg.geometry, vocab, np.random.default_rng(cfg.seed))
    load_weights(model, tensors, path)
    model.eval()
    return model
