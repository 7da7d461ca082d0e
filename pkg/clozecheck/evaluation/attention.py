"""Attention export: CSV tables and PGM heatmaps of one sample's attention."""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from clozecheck.core.types import Sample
from clozecheck.exceptions import GeometryMismatchError
from clozecheck.imaging.pgm import save_heatmap
from clozecheck.models.fusion import MacModel
from clozecheck.nn.tensor import no_grad


logger = logging.getLogger(__name__)

CROSS_HEADER = ("layer", "head", "token_index", "block_index", "weight")
ENCODER_HEADER = ("layer", "head", "query_block", "key_block", "weight")


@dataclass
class AttentionMaps:
    """Attention of a single sample.

    Attributes:
        cross: ``[N_fus, heads, L_t, L_i]`` cross-modal weights.
        encoder: ``[heads, L_i, L_i]`` self-attention of the last image
            encoder block, or None without encoder blocks.
        valid_tokens: ``|answer| + 1``.
        valid_blocks: Non-padding pixel blocks.
        encoder_layer: Index of the encoder block ``encoder`` comes from.
    """

    cross: np.ndarray
    encoder: np.ndarray | None
    valid_tokens: int
    valid_blocks: int
    encoder_layer: int = 0


def collect_attention(model: MacModel, sample: Sample) -> AttentionMaps:
    """Run ``sample`` through ``model`` in eval mode and keep its attention weights.

    The encoder weights are read from the shared ``last_attention`` slot, so
    calls on one model must not overlap.
    """
    if sample.image is None:
        msg = f"{sample.id} has no image loaded"
        raise GeometryMismatchError(msg)
    block_width = model.backbone.geometry.block_width
    valid_blocks = np.array([sample.image.valid_blocks(block_width)])
    images = sample.image.pixels[None, :, :]

    model.eval()
    with no_grad():
        s_img, _ = model.encode_image(images, valid_blocks)
        token_ids, valid_tokens = model.encode_answers([sample.answer])
        g, _ = model.encode_text(token_ids, valid_tokens)
        fused = model.fuse(g, s_img, valid_tokens, valid_blocks)

    encoder_blocks = model.image_encoder.blocks
    encoder = encoder_blocks[-1].attn.last_attention if encoder_blocks else None
    return AttentionMaps(
        cross=fused.attention[0],
        encoder=None if encoder is None else encoder[0],
        valid_tokens=int(valid_tokens[0]),
        valid_blocks=int(valid_blocks[0]),
        encoder_layer=len(encoder_blocks) - 1,
    )


def write_cross_csv(path: Path, maps: AttentionMaps) -> int:
    """One row per (layer, head, valid token, valid block); returns the row count."""
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = 0
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CROSS_HEADER)
        layers, heads = maps.cross.shape[:2]
        for layer in range(layers):
            for head in range(heads):
                for t in range(maps.valid_tokens):
                    for b in range(maps.valid_blocks):
                        weight = float(maps.cross[layer, head, t, b])
                        writer.writerow((layer, head, t, b, f"{weight:.6f}"))
                        rows += 1
    return rows


def write_encoder_csv(path: Path, maps: AttentionMaps) -> int:
    if maps.encoder is None:
        return 0
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = 0
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(ENCODER_HEADER)
        for head in range(maps.encoder.shape[0]):
            for q in range(maps.valid_blocks):
                for k in range(maps.valid_blocks):
                    weight = float(maps.encoder[head, q, k])
                    writer.writerow((maps.encoder_layer, head, q, k, f"{weight:.6f}"))
                    rows += 1
    return rows


def export_attention(out_dir: Path, maps: AttentionMaps, scale: int = 8) -> list[Path]:
    """Write ``cross_attention.csv``, ``encoder_attention.csv`` and one heatmap per (layer, head).

    Heatmaps cover the valid token x valid block region.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [out_dir / "cross_attention.csv"]
    write_cross_csv(written[0], maps)

    if maps.encoder is not None:
        encoder_csv = out_dir / "encoder_attention.csv"
        write_encoder_csv(encoder_csv, maps)
        written.append(encoder_csv)

    layers, heads = maps.cross.shape[:2]
    for layer in range(layers):
        for head in range(heads):
            path = out_dir / "heatmaps" / f"layer{layer}_head{head}.pgm"
            region = maps.cross[layer, head, : maps.valid_tokens, : maps.valid_blocks]
            save_heatmap(path, region, scale=scale)
            written.append(path)
    logger.info("Exported attention of %d layers x %d heads to %s", layers, heads, out_dir)
    return written
