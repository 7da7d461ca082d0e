"""Procedural glyphs and text-line rendering standing in for handwriting.

Every character owns a 7x5 stroke grid. Characters of one confusion family
share a base grid and differ from it by one moved cell, so look-alike
characters overlap heavily by construction.
"""

from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace

import numpy as np

from clozecheck.core.config import GeometryConfig
from clozecheck.core.types import GlyphImage
from clozecheck.core.types import GlyphStyle
from clozecheck.core.vocab import ConfusionSet
from clozecheck.core.vocab import Vocabulary
from clozecheck.core.vocab import sample_confusion
from clozecheck.exceptions import EmptyTextError
from clozecheck.exceptions import TooWideError
from clozecheck.exceptions import UnknownCharError
from clozecheck.utils.seeding import derive_rng


GRID_ROWS = 7
GRID_COLS = 5
MIN_INK_CELLS = 16
BACKGROUND = 1.0


def random_stroke_grid(rng: np.random.Generator) -> np.ndarray:
    """Draw horizontal and vertical strokes until the grid holds enough ink."""
    grid = np.zeros((GRID_ROWS, GRID_COLS), dtype=bool)
    while grid.sum() < MIN_INK_CELLS:
        if rng.random() < 0.5:
            row = int(rng.integers(GRID_ROWS))
            length = int(rng.integers(2, GRID_COLS + 1))
            start = int(rng.integers(GRID_COLS - length + 1))
            grid[row, start : start + length] = True
        else:
            col = int(rng.integers(GRID_COLS))
            length = int(rng.integers(2, GRID_ROWS + 1))
            start = int(rng.integers(GRID_ROWS - length + 1))
            grid[start : start + length, col] = True
    return grid


def move_one_cell(base: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Copy of ``base`` with one ink cell removed and one empty cell inked."""
    variant = base.copy()
    ink = np.flatnonzero(base)
    empty = np.flatnonzero(~base)
    variant.flat[ink[rng.integers(len(ink))]] = False
    variant.flat[empty[rng.integers(len(empty))]] = True
    return variant


def ink_overlap(a: GlyphImage, b: GlyphImage, threshold: float = 0.5) -> float:
    """Intersection over union of the ink pixels of two same-sized images."""
    ink_a = a.pixels < threshold
    ink_b = b.pixels < threshold
    union = np.logical_or(ink_a, ink_b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(ink_a, ink_b).sum() / union)


@dataclass
class GlyphBank:
    """Deterministic glyph grids for a vocabulary and its confusion families.

    Attributes:
        vocab: Characters to draw.
        confusion: Look-alike families; members share a base grid.
        geometry: Image height and base character width.
        seed: Seed of every grid.
    """

    vocab: Vocabulary
    confusion: ConfusionSet
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    seed: int = 0
    grids: dict[str, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.grids = {}
        for family in self.families():
            root = family[0]
            rng = derive_rng(self.seed, self.vocab.id_of[root])
            base = random_stroke_grid(rng)
            self.grids[root] = base
            seen = {base.tobytes()}
            for member in family[1:]:
                variant = move_one_cell(base, rng)
                for _ in range(64):
                    if variant.tobytes() not in seen:
                        break
                    variant = move_one_cell(base, rng)
                seen.add(variant.tobytes())
                self.grids[member] = variant

    def families(self) -> list[list[str]]:
        """Connected components of the confusion graph, in vocabulary order."""
        parent = {c: c for c in self.vocab.chars}

        def find(c: str) -> str:
            while parent[c] != c:
                parent[c] = parent[parent[c]]
                c = parent[c]
            return c

        for char, subs in self.confusion.pairs.items():
            if char not in parent:
                continue
            for sub in subs:
                if sub in parent:
                    parent[find(sub)] = find(char)

        groups: dict[str, list[str]] = {}
        for c in self.vocab.chars:
            groups.setdefault(find(c), []).append(c)
        return list(groups.values())

    def char_width(self, style: GlyphStyle) -> int:
        return round(self.geometry.base_char_width * style.width_scale)

    def render_char(
        self,
        c: str,
        style: GlyphStyle,
        rng: np.random.Generator,
        lookalike: str | None = None,
    ) -> GlyphImage:
        """Render one character.

        With ``lookalike`` set, each cell where the two grids differ is
        flipped toward the look-alike with probability one half, giving a
        sloppy glyph whose content is still ``c``.

        Raises:
            UnknownCharError: If ``c`` (or ``lookalike``) has no glyph.
        """
        grid = self._grid(c)
        if lookalike is not None:
            other = self._grid(lookalike)
            flip = (grid != other) & (rng.random(grid.shape) < 0.5)
            grid = np.where(flip, other, grid)

        height = self.geometry.img_height
        width = self.char_width(style)
        cell_h = max(1, (height - 2) // GRID_ROWS)
        cell_w = max(1, (width - 2) // GRID_COLS)
        top = (height - cell_h * GRID_ROWS) // 2 + style.y_shift
        left = (width - cell_w * GRID_COLS) // 2 + style.x_shift

        mask = np.kron(grid, np.ones((cell_h, cell_w), dtype=bool))
        for _ in range(style.thickness):
            mask = mask.copy()
            mask[:, 1:] |= mask[:, :-1]

        canvas = np.zeros((height, width), dtype=bool)
        rows = slice(max(top, 0), min(top + mask.shape[0], height))
        cols = slice(max(left, 0), min(left + mask.shape[1], width))
        canvas[rows, cols] = mask[
            rows.start - top : rows.stop - top, cols.start - left : cols.stop - left
        ]

        ink = rng.uniform(0.0, 0.2)
        pixels = np.where(canvas, ink, BACKGROUND).astype(np.float32)
        return GlyphImage(pixels=pixels, valid_width=width)

    def render_line(
        self,
        text: str,
        style: GlyphStyle,
        ligature_prob: float,
        rng: np.random.Generator,
        sloppy_prob: float = 0.0,
    ) -> tuple[GlyphImage, str]:
        """Render ``text`` as one line and return it with the unchanged content.

        Each glyph gets a small vertical jitter. Each adjacent pair is, with
        ``ligature_prob``, either pulled into an overlap (ligature) or pushed
        apart (split look); otherwise glyphs sit ``char_gap`` apart.

        Raises:
            EmptyTextError: If ``text`` is empty.
        """
        if not text:
            msg = "Cannot render an empty line"
            raise EmptyTextError(msg)

        glyphs: list[GlyphImage] = []
        for c in text:
            lookalike = None
            if sloppy_prob > 0 and c in self.confusion and rng.random() < sloppy_prob:
                lookalike = sample_confusion(c, self.confusion, rng)
            jitter = int(rng.integers(-1, 2))
            glyph_style = replace(style, y_shift=style.y_shift + jitter)
            glyphs.append(self.render_char(c, glyph_style, rng, lookalike=lookalike))

        offsets = [0]
        for left_glyph in glyphs[:-1]:
            gap = self.geometry.char_gap
            if ligature_prob > 0 and rng.random() < ligature_prob:
                quarter = max(1, left_glyph.width // 4)
                if rng.random() < 0.5:
                    gap = -int(rng.integers(1, quarter + 1))
                else:
                    gap += int(rng.integers(quarter, 2 * quarter + 1))
            offsets.append(max(offsets[-1] + left_glyph.width + gap, offsets[-1] + 1))

        total = max(x + g.width for x, g in zip(offsets, glyphs, strict=True))
        pixels = np.full((self.geometry.img_height, total), BACKGROUND, dtype=np.float32)
        for x, glyph in zip(offsets, glyphs, strict=True):
            region = pixels[:, x : x + glyph.width]
            np.minimum(region, glyph.pixels, out=region)
        return GlyphImage(pixels=pixels, valid_width=total), text

    def _grid(self, c: str) -> np.ndarray:
        grid = self.grids.get(c)
        if grid is None:
            raise UnknownCharError(0, c)
        return grid


def pad_to_width(img: GlyphImage, max_width: int) -> GlyphImage:
    """Right-pad with background up to ``max_width``; ``valid_width`` is kept.

    Raises:
        TooWideError: If the image is already wider than ``max_width``.
    """
    if img.width > max_width:
        raise TooWideError(img.width, max_width)
    if img.width == max_width:
        return img
    pad = np.full((img.height, max_width - img.width), BACKGROUND, dtype=img.pixels.dtype)
    return GlyphImage(pixels=np.hstack([img.pixels, pad]), valid_width=img.valid_width)
