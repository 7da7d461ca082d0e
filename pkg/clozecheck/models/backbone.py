"""Residual convolutional backbone and the CTC recognition head."""

import math

import numpy as np

from clozecheck.core.config import GeometryConfig
from clozecheck.core.config import ModelConfig
from clozecheck.core.vocab import Vocabulary
from clozecheck.exceptions import GeometryMismatchError
from clozecheck.models.ctc import batch_greedy_decode
from clozecheck.nn import functional as F
from clozecheck.nn.layers import Conv2d
from clozecheck.nn.layers import Dropout
from clozecheck.nn.layers import Linear
from clozecheck.nn.layers import Module
from clozecheck.nn.tensor import Tensor


def pool_plan(stages: int, block_width: int, img_height: int) -> list[tuple[int, int]]:
    """Per-stage ``(kh, kw)`` pooling windows.

    Width halves at each stage until ``block_width`` is consumed; the last
    stage takes whatever factor is left. Height halves while it stays even
    and at least 2 after pooling.

    Example:
        >>> pool_plan(4, 8, 32)
        [(2, 2), (2, 2), (2, 2), (2, 1)]
    """
    plan: list[tuple[int, int]] = []
    width_left = block_width
    height = img_height
    for i in range(stages):
        if i == stages - 1:
            kw = width_left
        else:
            kw = 2 if width_left > 1 else 1
        width_left //= kw
        kh = 2 if height % 2 == 0 and height >= 4 else 1
        height //= kh
        plan.append((kh, kw))
    return plan


class ResidualUnit(Module):
    """``relu(skip(x) + conv(relu(conv(x))))``; ``skip`` is a 1x1 projection when channels change."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator) -> None:
        self.conv_1 = Conv2d(in_channels, out_channels, rng)
        self.conv_2 = Conv2d(out_channels, out_channels, rng)
        self.project = (
            Conv2d(in_channels, out_channels, rng, kernel=1) if in_channels != out_channels else None
        )

    def forward(self, x: Tensor) -> Tensor:
        skip = self.project(x) if self.project is not None else x
        return F.relu(skip + self.conv_2(F.relu(self.conv_1(x))))


class Backbone(Module):
    """Maps ``[B, H, max_width]`` images to ``[B, L_i, hidden_size]`` block features.

    Pixels are inverted first: background becomes 0, the value of the
    convolution padding.
    """

    def __init__(self, model: ModelConfig, geometry: GeometryConfig, rng: np.random.Generator) -> None:
        self.geometry = geometry
        self.plan = pool_plan(len(model.channels), geometry.block_width, geometry.img_height)
        self.stem = Conv2d(1, model.channels[0], rng)
        self.stages: list[ResidualUnit] = []
        self.stage_sizes = list(model.conv_blocks)
        in_channels = model.channels[0]
        for count, out_channels in zip(model.conv_blocks, model.channels, strict=True):
            for _ in range(count):
                self.stages.append(ResidualUnit(in_channels, out_channels, rng))
                in_channels = out_channels
        self.hidden_size = model.hidden_size
        self.dropout = Dropout(model.conv_dropout, rng)

    def check_geometry(self, images: np.ndarray) -> None:
        g = self.geometry
        if images.ndim != 3 or images.shape[1] != g.img_height or images.shape[2] % g.block_width:
            msg = (
                f"Images of shape {images.shape} do not fit img_height={g.img_height} "
                f"and block_width={g.block_width}"
            )
            raise GeometryMismatchError(msg)
        if images.shape[2] != g.max_width:
            msg = f"Image width {images.shape[2]} differs from max_width {g.max_width}"
            raise GeometryMismatchError(msg)

    def forward(self, images: np.ndarray) -> Tensor:
        """One feature vector per pixel block, left to right.

        Raises:
            GeometryMismatchError: If the images are not ``img_height`` x ``max_width``.
        """
        images = np.asarray(images)
        self.check_geometry(images)
        x = F.relu(self.stem(Tensor(1.0 - images[:, None, :, :])))
        units = iter(self.stages)
        for count, kernel in zip(self.stage_sizes, self.plan, strict=True):
            for _ in range(count):
                x = next(units)(x)
            x = self.dropout(F.maxpool2d(x, kernel))
        features = x.mean(axis=2)
        return features.transpose(0, 2, 1)

    def receptive_field(self) -> int:
        """Horizontal receptive field of one output feature, in pixels."""
        rf, jump = 3, 1
        for count, (_, kw) in zip(self.stage_sizes, self.plan, strict=True):
            rf += count * 4 * jump
            rf += (kw - 1) * jump
            jump *= kw
        return rf

    def receptive_margin(self) -> int:
        """Blocks next to the padding boundary whose features may see padding."""
        return math.ceil(self.receptive_field() / self.geometry.block_width)


class CtcHead(Module):
    """Linear projection from ``hidden_size`` to characters plus the CTC blank."""

    def __init__(self, hidden_size: int, vocab: Vocabulary, rng: np.random.Generator) -> None:
        self.proj = Linear(hidden_size, vocab.num_chars + 1, rng)

    def forward(self, features: Tensor) -> Tensor:
        return F.log_softmax(self.proj(features))


class OcrModel(Module):
    """Backbone plus CTC head."""

    def __init__(
        self,
        model: ModelConfig,
        geometry: GeometryConfig,
        vocab: Vocabulary,
        rng: np.random.Generator,
    ) -> None:
        self.backbone = Backbone(model, geometry, rng)
        self.head = CtcHead(model.hidden_size, vocab, rng)
        self.vocab = vocab

    def forward(self, images: np.ndarray) -> Tensor:
        """``[B, L_i, |V| + 1]`` per-block log-probabilities."""
        return self.head(self.backbone(images))

    def decode(self, images: np.ndarray, valid_blocks: np.ndarray) -> list[str]:
        """Greedy transcription of each image over its valid blocks."""
        log_probs = self.forward(images).data
        ids = batch_greedy_decode(log_probs, self.vocab.blank_id, valid_blocks.tolist())
        return [self.vocab.decode_text(seq) for seq in ids]
