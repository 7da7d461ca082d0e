"""Tests for attention export."""

import csv

import numpy as np
import pytest

from clozecheck.evaluation.attention import CROSS_HEADER
from clozecheck.evaluation.attention import collect_attention
from clozecheck.evaluation.attention import export_attention
from clozecheck.evaluation.attention import write_cross_csv
from clozecheck.imaging.pgm import load_pgm
from clozecheck.models.fusion import MacModel
from tests.conftest import make_sample


@pytest.fixture
def maps(tiny_config, vocab):
    """Attention of one sample under a two-block fusion stack."""
    model_cfg = tiny_config.model.model_copy(update={"n_fus": 2})
    mac = MacModel(model_cfg, tiny_config.geometry, vocab, np.random.default_rng(0))
    return collect_attention(mac, make_sample("ABC", "AB"))


def test_collect_attention_shapes(maps):
    """Test map shapes and valid extents."""
    assert maps.cross.shape == (2, 2, 5, 16)
    assert maps.valid_tokens == 3
    assert maps.valid_blocks == 5
    assert maps.encoder.shape == (2, 16, 16)
    assert maps.encoder_layer == 0


def test_collected_rows_are_distributions(maps):
    """Test cross-attention rows over valid blocks."""
    rows = maps.cross[:, :, : maps.valid_tokens]
    assert np.allclose(rows.sum(axis=-1), 1.0, atol=1e-6)
    assert np.all(rows[..., maps.valid_blocks :] == 0.0)


def test_cross_csv_rows(maps, tmp_path):
    """Test one row per layer, head, valid token and valid block."""
    path = tmp_path / "cross.csv"
    count = write_cross_csv(path, maps)
    assert count == 2 * 2 * 3 * 5
    with path.open() as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == CROSS_HEADER
    assert len(rows) == count + 1
    first = rows[1]
    assert first[:4] == ["0", "0", "0", "0"]
    assert float(first[4]) == pytest.approx(maps.cross[0, 0, 0, 0], abs=1e-6)


def test_export_attention(maps, tmp_path):
    """Test exported files and heatmap sizes."""
    paths = export_attention(tmp_path / "attn", maps, scale=4)
    names = {p.relative_to(tmp_path / "attn").as_posix() for p in paths}
    assert names == {
        "cross_attention.csv",
        "encoder_attention.csv",
        "heatmaps/layer0_head0.pgm",
        "heatmaps/layer0_head1.pgm",
        "heatmaps/layer1_head0.pgm",
        "heatmaps/layer1_head1.pgm",
    }
    heatmap = load_pgm(tmp_path / "attn" / "heatmaps" / "layer1_head0.pgm")
    assert heatmap.shape == (3 * 4, 5 * 4)
    assert heatmap.min() == 0.0


def test_export_without_encoder_blocks(tiny_config, vocab, tmp_path):
    """Test that models without image self-attention skip the encoder table."""
    model_cfg = tiny_config.model.model_copy(update={"n_enc": 0})
    mac = MacModel(model_cfg, tiny_config.geometry, vocab, np.random.default_rng(0))
    maps = collect_attention(mac, make_sample("AB", "AB"))
    assert maps.encoder is None
    paths = export_attention(tmp_path, maps)
    assert not any(p.name == "encoder_attention.csv" for p in paths)
