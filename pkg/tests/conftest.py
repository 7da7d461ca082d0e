"""Shared fixtures: a desk-sized run configuration and its resources."""

from pathlib import Path
from typing import Any

import numpy as np
import pytest

from clozecheck.core.alignment import derive_labels
from clozecheck.core.alignment import reduce_binary
from clozecheck.core.config import RunConfig
from clozecheck.core.types import GlyphImage
from clozecheck.core.types import Sample
from clozecheck.core.vocab import ConfusionSet
from clozecheck.core.vocab import Vocabulary
from clozecheck.data.generator import CorpusGenerator


def tiny_config_data(run_dir: Path) -> dict[str, Any]:
    """Smallest configuration that still exercises every stage."""
    return {
        "seed": 7,
        "run_dir": str(run_dir),
        "geometry": {
            "img_height": 16,
            "block_width": 4,
            "max_width": 64,
            "base_char_width": 8,
            "char_gap": 1,
        },
        "model": {
            "conv_blocks": [1, 1],
            "channels": [4, 8],
            "hidden_size": 8,
            "embed_dim": 8,
            "dim": 8,
            "heads": 2,
            "ffn_dim": 16,
            "n_enc": 1,
            "n_fus": 1,
            "max_answer_len": 5,
            "dropout": 0.0,
            "conv_dropout": 0.0,
        },
        "train": {
            "epochs_pretrain": 1,
            "epochs_mac": 1,
            "batch_size": 4,
            "lr_pretrain": 1e-3,
            "lr_mac": 1e-3,
        },
        "data": {
            "vocab_size": 8,
            "family_size": 4,
            "min_answer_len": 1,
            "max_answer_len": 3,
            "shards": {
                "synthetic": {"count": 4},
                "handwriting": {"count": 3, "max_thickness": 1},
                "platform": {"count": 3, "error_ratio": 0.34},
            },
            "dev": {"count": 3, "error_ratio": 0.34},
            "test": {"count": 6, "error_ratio": 0.5},
        },
    }


@pytest.fixture
def tiny_config(tmp_path):
    """Tiny run configuration rooted in a temporary directory."""
    return RunConfig.model_validate(tiny_config_data(tmp_path / "run"))


@pytest.fixture
def vocab():
    """Eight-character synthetic vocabulary (A..H)."""
    return Vocabulary.synthetic(8)


@pytest.fixture
def confusion(vocab):
    """Two look-alike families of four characters."""
    return ConfusionSet.synthetic(vocab, family_size=4, seed=0)


@pytest.fixture
def corpus(tiny_config, vocab, confusion):
    """Original (pre-augmentation) samples of every split."""
    return CorpusGenerator.from_config(tiny_config, vocab, confusion).generate()


def blank_image(height: int = 16, width: int = 64, valid_width: int = 20) -> GlyphImage:
    pixels = np.ones((height, width), dtype=np.float32)
    pixels[4:12, 2:valid_width] = 0.1
    return GlyphImage(pixels=pixels, valid_width=valid_width)


def make_sample(content: str, answer: str, sample_id: str = "s-00000", **kwargs: Any) -> Sample:
    """Sample with labels and y derived from ``content`` and ``answer``."""
    labels = derive_labels(content, answer)
    return Sample(
        id=sample_id,
        content=content,
        answer=answer,
        labels=labels,
        y=reduce_binary(labels),
        image=kwargs.pop("image", blank_image()),
        image_path=kwargs.pop("image_path", f"images/{sample_id}.pgm"),
        **kwargs,
    )
