"""Tests for glyph rendering and PGM persistence."""

import numpy as np
import pytest

from clozecheck.core.config import GeometryConfig
from clozecheck.core.types import GlyphImage
from clozecheck.core.types import GlyphStyle
from clozecheck.exceptions import EmptyTextError
from clozecheck.exceptions import TooWideError
from clozecheck.exceptions import UnknownCharError
from clozecheck.imaging.glyphs import GlyphBank
from clozecheck.imaging.glyphs import ink_overlap
from clozecheck.imaging.glyphs import pad_to_width
from clozecheck.imaging.pgm import infer_valid_width
from clozecheck.imaging.pgm import load_glyph_image
from clozecheck.imaging.pgm import load_pgm
from clozecheck.imaging.pgm import save_heatmap
from clozecheck.imaging.pgm import save_pgm


@pytest.fixture
def bank(vocab, confusion):
    """Glyph bank at the default geometry."""
    return GlyphBank(vocab, confusion, geometry=GeometryConfig(), seed=0)


def test_families_match_confusion(bank):
    """Test that every confusion family becomes one glyph family."""
    families = bank.families()
    assert len(families) == 2
    assert sorted(c for family in families for c in family) == list("ABCDEFGH")


def test_render_char_deterministic(bank):
    """Test that the same character, style and seed give identical pixels."""
    style = GlyphStyle(x_shift=1, thickness=1)
    a = bank.render_char("C", style, np.random.default_rng(4))
    b = bank.render_char("C", style, np.random.default_rng(4))
    assert a.same_pixels(b)


def test_confusion_pairs_overlap(bank, confusion):
    """Test that look-alike characters share most of their ink at identical style."""
    style = GlyphStyle()
    for char, subs in confusion.pairs.items():
        a = bank.render_char(char, style, np.random.default_rng(0))
        for sub in subs:
            b = bank.render_char(sub, style, np.random.default_rng(0))
            assert ink_overlap(a, b) >= 0.7, (char, sub)


def test_distinct_characters_have_distinct_glyphs(bank, vocab):
    """Test that no two characters share a stroke grid."""
    grids = {bank.grids[c].tobytes() for c in vocab.chars}
    assert len(grids) == vocab.num_chars


def test_render_char_unknown(bank):
    """Test that characters outside the bank raise."""
    with pytest.raises(UnknownCharError):
        bank.render_char("z", GlyphStyle(), np.random.default_rng(0))


def test_render_line_single_char_width(bank):
    """Test that a one-character line is exactly one glyph wide."""
    style = GlyphStyle(width_scale=1.25)
    image, content = bank.render_line("A", style, 0.0, np.random.default_rng(0))
    assert content == "A"
    assert image.width == bank.char_width(style) == 20
    assert image.valid_width == image.width


def test_render_line_without_ligatures(bank):
    """Test that width is the sum of glyph widths plus the gaps."""
    style = GlyphStyle()
    text = "ABCDE"
    image, _ = bank.render_line(text, style, 0.0, np.random.default_rng(1))
    expected = len(text) * bank.char_width(style) + (len(text) - 1) * bank.geometry.char_gap
    assert image.width == expected
    assert image.height == bank.geometry.img_height


def test_render_line_deterministic(bank):
    """Test that the same inputs and seed render the same line."""
    style = GlyphStyle(y_shift=1)
    a, _ = bank.render_line("HEAD", style, 0.5, np.random.default_rng(9), sloppy_prob=0.5)
    b, _ = bank.render_line("HEAD", style, 0.5, np.random.default_rng(9), sloppy_prob=0.5)
    assert a.same_pixels(b)


def test_render_line_empty(bank):
    """Test that empty lines cannot be rendered."""
    with pytest.raises(EmptyTextError):
        bank.render_line("", GlyphStyle(), 0.0, np.random.default_rng(0))


def test_render_line_pixel_range(bank):
    """Test that pixels stay in [0, 1] with background at 1."""
    image, _ = bank.render_line("ABAB", GlyphStyle(thickness=2), 0.3, np.random.default_rng(2))
    assert image.pixels.min() >= 0.0
    assert image.pixels.max() == 1.0
    assert (image.pixels < 0.5).any()


def test_glyph_style_bounds():
    """Test the width scale range."""
    with pytest.raises(ValueError, match="width_scale"):
        GlyphStyle(width_scale=2.0)


def test_pad_to_width():
    """Test right padding with background columns."""
    image = GlyphImage(pixels=np.zeros((8, 40), dtype=np.float32), valid_width=40)
    padded = pad_to_width(image, 64)
    assert padded.width == 64
    assert padded.valid_width == 40
    assert np.all(padded.pixels[:, 40:] == 1.0)
    assert np.all(padded.pixels[:, :40] == 0.0)
    assert padded.valid_blocks(8) == 5


def test_pad_to_width_identity_and_overflow():
    """Test the exact-width identity and the too-wide error."""
    image = GlyphImage(pixels=np.zeros((8, 64), dtype=np.float32), valid_width=64)
    assert pad_to_width(image, 64) is image
    with pytest.raises(TooWideError, match="exceeds max_width 32"):
        pad_to_width(image, 32)


def test_pgm_round_trip(tmp_path):
    """Test that pixels survive persistence up to 8-bit quantization."""
    pixels = np.random.default_rng(0).random((16, 24)).astype(np.float32)
    path = tmp_path / "line.pgm"
    save_pgm(path, pixels)
    assert path.read_bytes().startswith(b"P5")
    loaded = load_pgm(path)
    assert loaded.shape == pixels.shape
    assert np.max(np.abs(loaded - pixels)) <= 0.5 / 255 + 1e-6


def test_load_glyph_image_infers_valid_width(tmp_path):
    """Test that the valid width defaults to the rightmost ink column."""
    pixels = np.ones((8, 32), dtype=np.float32)
    pixels[2:5, 3:11] = 0.0
    path = tmp_path / "line.pgm"
    save_pgm(path, pixels)
    assert infer_valid_width(pixels) == 11
    assert load_glyph_image(path).valid_width == 11
    assert load_glyph_image(path, valid_width=20).valid_width == 20


def test_save_heatmap_scales_cells(tmp_path):
    """Test that each weight becomes a dark-for-large square."""
    path = tmp_path / "map.pgm"
    save_heatmap(path, np.array([[0.0, 0.5, 1.0], [0.25, 0.0, 0.0]]), scale=2)
    image = load_pgm(path)
    assert image.shape == (4, 6)
    assert image[0, 4] == 0.0
    assert image[0, 0] == 1.0
