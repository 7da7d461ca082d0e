"""Binary PGM (P5, 8-bit) persistence for line images and heatmaps."""

from pathlib import Path

import numpy as np
from PIL import Image

from clozecheck.core.types import GlyphImage


def save_pgm(path: Path, pixels: np.ndarray) -> None:
    """Write grayscale floats in [0, 1] as an 8-bit binary PGM."""
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.clip(np.rint(np.asarray(pixels) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path, format="PPM")


def load_pgm(path: Path) -> np.ndarray:
    """Read an 8-bit grayscale image as float32 values in [0, 1]."""
    with Image.open(path) as img:
        data = np.asarray(img.convert("L"), dtype=np.float32)
    return data / 255.0


def infer_valid_width(pixels: np.ndarray, background: float = 1.0) -> int:
    """Width up to and including the rightmost column that holds ink."""
    inked = np.flatnonzero((pixels < background).any(axis=0))
    return int(inked[-1]) + 1 if inked.size else 1


def load_glyph_image(path: Path, valid_width: int | None = None) -> GlyphImage:
    """Load a line image; without ``valid_width`` it is inferred from the ink."""
    pixels = load_pgm(path)
    if valid_width is None:
        valid_width = infer_valid_width(pixels)
    return GlyphImage(pixels=pixels, valid_width=valid_width)


def save_heatmap(path: Path, weights: np.ndarray, scale: int = 8) -> None:
    """Write a 2-D weight matrix as a PGM heatmap (darker = larger weight).

    Each cell is drawn as a ``scale`` x ``scale`` square.
    """
    weights = np.asarray(weights, dtype=np.float64)
    peak = weights.max() if weights.size and weights.max() > 0 else 1.0
    cells = 1.0 - weights / peak
    save_pgm(path, np.kron(cells, np.ones((scale, scale))))
