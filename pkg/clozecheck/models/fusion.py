"""Multimodal answer-correction model: image encoder, text embedder, fusion stack, output head.

Queries of the cross-modal attention come from the answer side; keys and
values come from the encoded image, which stays fixed across all fusion
blocks. Every attention masks padded tokens and padded pixel blocks.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from clozecheck.core.alignment import reduce_binary
from clozecheck.core.config import GeometryConfig
from clozecheck.core.config import ModelConfig
from clozecheck.core.types import IGNORE_LABEL
from clozecheck.core.types import NUM_LABELS
from clozecheck.core.types import EditLabel
from clozecheck.core.types import LabelSeq
from clozecheck.core.vocab import Vocabulary
from clozecheck.exceptions import AnswerTooLongError
from clozecheck.exceptions import LengthMismatchError
from clozecheck.models.backbone import Backbone
from clozecheck.nn import functional as F
from clozecheck.nn.layers import Dropout
from clozecheck.nn.layers import Embedding
from clozecheck.nn.layers import FeedForward
from clozecheck.nn.layers import LayerNorm
from clozecheck.nn.layers import Linear
from clozecheck.nn.layers import Module
from clozecheck.nn.layers import MultiHeadAttention
from clozecheck.nn.layers import Parameter
from clozecheck.nn.layers import TransformerBlock
from clozecheck.nn.tensor import Tensor


def key_padding_mask(valid: np.ndarray, length: int) -> np.ndarray:
    """``[B, 1, 1, length]`` additive mask, -inf at positions ``>= valid[b]``."""
    positions = np.arange(length)[None, :]
    padded = positions >= np.asarray(valid)[:, None]
    return np.where(padded, -np.inf, 0.0)[:, None, None, :]


def fusion_mask(valid_tokens: np.ndarray, valid_blocks: np.ndarray, text_len: int, blocks: int) -> np.ndarray:
    """``[B, 1, L_t, L_i]`` mask: -inf iff the token or the pixel block is padding."""
    token_pad = np.arange(text_len)[None, :] >= np.asarray(valid_tokens)[:, None]
    block_pad = np.arange(blocks)[None, :] >= np.asarray(valid_blocks)[:, None]
    padded = token_pad[:, :, None] | block_pad[:, None, :]
    return np.where(padded, -np.inf, 0.0)[:, None, :, :]


class ImageEncoder(Module):
    """Backbone features, width projection, learnable positions, self-attention stack."""

    def __init__(self, model: ModelConfig, geometry: GeometryConfig, rng: np.random.Generator) -> None:
        self.backbone = Backbone(model, geometry, rng)
        self.w_1 = Linear(model.hidden_size, model.dim, rng)
        self.positions = Parameter(rng.normal(0.0, 0.02, size=(geometry.num_blocks, model.dim)))
        self.blocks = [
            TransformerBlock(model.dim, model.heads, model.ffn_dim, model.dropout, rng)
            for _ in range(model.n_enc)
        ]

    def train(self, mode: bool = True) -> Module:
        super().train(mode)
        # a frozen backbone always runs in eval mode
        if self.backbone_frozen:
            self.backbone.eval()
        return self

    @property
    def backbone_frozen(self) -> bool:
        return all(p.frozen for p in self.backbone.parameters())

    def forward(self, images: np.ndarray, valid_blocks: np.ndarray) -> Tensor:
        h = self.w_1(self.backbone(images)) + self.positions
        mask = key_padding_mask(valid_blocks, h.shape[1])
        for block in self.blocks:
            h = block(h, mask)
        return h


class TextEmbedder(Module):
    """``g_j = E[id_j] W_2 + P_hat_j`` over ``<BLK>`` + answer ids."""

    def __init__(self, model: ModelConfig, vocab: Vocabulary, rng: np.random.Generator) -> None:
        self.embedding = Embedding(vocab.size, model.embed_dim, rng)
        self.w_2 = Linear(model.embed_dim, model.dim, rng, bias=False)
        self.positions = Parameter(rng.normal(0.0, 0.02, size=(model.max_answer_len, model.dim)))

    def forward(self, token_ids: np.ndarray) -> Tensor:
        return self.w_2(self.embedding(token_ids)) + self.positions


class TextSelfAttention(Module):
    """``LN(s + SA(s))`` over the answer tokens."""

    def __init__(self, model: ModelConfig, rng: np.random.Generator) -> None:
        self.attn = MultiHeadAttention(model.dim, model.heads, model.dropout, rng)
        self.norm = LayerNorm(model.dim)
        self.dropout = Dropout(model.dropout, rng)

    def forward(self, s: Tensor, mask: np.ndarray) -> Tensor:
        return self.norm(s + self.dropout(self.attn(s, s, s, mask, allow_empty_rows=True)))


class FusionBlock(Module):
    """Optional text self-attention, cross-modal attention, feed-forward; post-norm residuals.

    ``last_image`` and ``last_attention`` hold the most recent call only and
    are shared across threads; ``attend`` returns per-call weights.
    """

    def __init__(self, model: ModelConfig, rng: np.random.Generator, text_self_attn: bool) -> None:
        self.text_attn = TextSelfAttention(model, rng) if text_self_attn else None
        self.cross_attn = MultiHeadAttention(model.dim, model.heads, model.dropout, rng)
        self.norm_cross = LayerNorm(model.dim)
        self.ffn = FeedForward(model.dim, model.ffn_dim, model.dropout, rng)
        self.norm_ffn = LayerNorm(model.dim)
        self.dropout = Dropout(model.dropout, rng)
        self.last_image: np.ndarray | None = None

    def forward(
        self, s: Tensor, image: Tensor, text_mask: np.ndarray, cross_mask: np.ndarray
    ) -> Tensor:
        return self.attend(s, image, text_mask, cross_mask)[0]

    def attend(
        self, s: Tensor, image: Tensor, text_mask: np.ndarray, cross_mask: np.ndarray
    ) -> tuple[Tensor, np.ndarray]:
        """Fused text features and this call's cross-attention ``[B, heads, L_t, L_i]``."""
        self.last_image = image.data
        if self.text_attn is not None:
            s = self.text_attn(s, text_mask)
        attended, attention = self.cross_attn.attend(
            s, image, image, cross_mask, allow_empty_rows=True
        )
        s = self.norm_cross(s + self.dropout(attended))
        return self.norm_ffn(s + self.dropout(self.ffn(s))), attention

    @property
    def last_attention(self) -> np.ndarray | None:
        return self.cross_attn.last_attention


@dataclass
class FusionOutput:
    """Fused text features and the cross-attention maps ``[B, N_fus, heads, L_t, L_i]``."""

    features: Tensor
    attention: np.ndarray


@dataclass
class Prediction:
    """Per-position label distributions and the decoded label sequences."""

    probs: np.ndarray
    labels: list[LabelSeq]

    @property
    def binary(self) -> list[int]:
        return [reduce_binary(seq) for seq in self.labels]


class MacModel(Module):
    """Full correction model.

    Attributes:
        image_encoder: Backbone, width projection, positions, self-attention.
        text_embedder: Answer embedding with positions.
        text_attn_once: Single text self-attention before the fusion stack
            (``text_self_attn_placement == "once"``), else None.
        fusion: Stacked fusion blocks.
        head: ``dim -> 6`` label scores.
    """

    def __init__(
        self,
        model: ModelConfig,
        geometry: GeometryConfig,
        vocab: Vocabulary,
        rng: np.random.Generator,
    ) -> None:
        self.config = model
        self.vocab = vocab
        self.image_encoder = ImageEncoder(model, geometry, rng)
        self.text_embedder = TextEmbedder(model, vocab, rng)
        once = model.text_self_attn and model.text_self_attn_placement == "once"
        per_block = model.text_self_attn and model.text_self_attn_placement == "per_block"
        self.text_attn_once = TextSelfAttention(model, rng) if once else None
        self.fusion = [FusionBlock(model, rng, text_self_attn=per_block) for _ in range(model.n_fus)]
        self.head = Linear(model.dim, NUM_LABELS, rng, bias=False)

    @property
    def backbone(self) -> Backbone:
        return self.image_encoder.backbone

    @property
    def text_len(self) -> int:
        return self.config.max_answer_len

    def encode_image(self, images: np.ndarray, valid_blocks: np.ndarray) -> tuple[Tensor, np.ndarray]:
        """``S_img`` ``[B, L_i, dim]`` and the valid block counts."""
        return self.image_encoder(images, valid_blocks), np.asarray(valid_blocks)

    def encode_answers(self, answers: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        """``<BLK>`` + answer ids padded to ``max_answer_len``, and valid token counts.

        Raises:
            AnswerTooLongError: If an answer plus ``<BLK>`` exceeds ``max_answer_len``.
        """
        ids = np.stack([self.vocab.encode_answer(a, self.text_len) for a in answers])
        return ids, np.array([len(a) + 1 for a in answers], dtype=np.int64)

    def encode_text(self, token_ids: np.ndarray, valid_tokens: np.ndarray) -> tuple[Tensor, np.ndarray]:
        """``G`` ``[B, L_t, dim]`` and the valid token counts.

        Raises:
            AnswerTooLongError: If ``token_ids`` is longer than ``max_answer_len``.
        """
        token_ids = np.asarray(token_ids)
        if token_ids.shape[1] != self.text_len:
            raise AnswerTooLongError(int(token_ids.shape[1]) - 1, self.text_len)
        return self.text_embedder(token_ids), np.asarray(valid_tokens)

    def fuse(
        self, g: Tensor, s_img: Tensor, valid_tokens: np.ndarray, valid_blocks: np.ndarray
    ) -> FusionOutput:
        """Run the fusion stack; ``s_img`` is passed unchanged to every block."""
        text_mask = key_padding_mask(valid_tokens, g.shape[1])
        cross_mask = fusion_mask(valid_tokens, valid_blocks, g.shape[1], s_img.shape[1])
        s = g
        if self.text_attn_once is not None:
            s = self.text_attn_once(s, text_mask)
        maps = []
        for block in self.fusion:
            s, attention = block.attend(s, s_img, text_mask, cross_mask)
            maps.append(attention)
        return FusionOutput(features=s, attention=np.stack(maps, axis=1))

    def scores(
        self,
        images: np.ndarray,
        valid_blocks: np.ndarray,
        token_ids: np.ndarray,
        valid_tokens: np.ndarray,
    ) -> Tensor:
        """Pre-softmax label scores ``[B, L_t, 6]``."""
        s_img, valid_blocks = self.encode_image(images, valid_blocks)
        g, valid_tokens = self.encode_text(token_ids, valid_tokens)
        return self.head(self.fuse(g, s_img, valid_tokens, valid_blocks).features)

    def forward(
        self,
        images: np.ndarray,
        valid_blocks: np.ndarray,
        token_ids: np.ndarray,
        valid_tokens: np.ndarray,
    ) -> Tensor:
        return self.scores(images, valid_blocks, token_ids, valid_tokens)

    def predict_labels(self, s_fus: Tensor, valid_tokens: np.ndarray) -> Prediction:
        """Softmax label distributions and argmax label sequences over valid positions."""
        return predict_from_scores(self.head(s_fus), valid_tokens)


def predict_from_scores(scores: Tensor, valid_tokens: np.ndarray) -> Prediction:
    """Row-stochastic ``O`` and one repaired label sequence per sample, trimmed to ``valid``."""
    probs = F.softmax(scores).data
    best = probs.argmax(axis=-1)
    labels = [
        LabelSeq.repaired(EditLabel.from_index(int(k)) for k in best[b, : int(n)])
        for b, n in enumerate(np.asarray(valid_tokens))
    ]
    return Prediction(probs=probs, labels=labels)


def mac_loss(scores: Tensor, gold: np.ndarray | Sequence[LabelSeq]) -> Tensor:
    """Mean cross-entropy over valid positions.

    Args:
        scores: ``[B, L_t, 6]`` pre-softmax scores.
        gold: ``[B, L_t]`` label ids with ``IGNORE_LABEL`` on padding, or one
            ``LabelSeq`` per sample.

    Raises:
        LengthMismatchError: If a gold sequence is longer than ``L_t`` or the
            batch sizes differ.
    """
    batch, text_len, _ = scores.shape
    if not isinstance(gold, np.ndarray):
        seqs = list(gold)
        if len(seqs) != batch:
            msg = f"{len(seqs)} gold sequences for a batch of {batch}"
            raise LengthMismatchError(msg)
        ids = np.full((batch, text_len), IGNORE_LABEL, dtype=np.int64)
        for row, seq in enumerate(seqs):
            if len(seq) > text_len:
                msg = f"gold sequence of length {len(seq)} exceeds text length {text_len}"
                raise LengthMismatchError(msg)
            ids[row, : len(seq)] = seq.to_ids()
        gold = ids
    if gold.shape != (batch, text_len):
        msg = f"gold labels of shape {gold.shape} for scores of shape {scores.shape}"
        raise LengthMismatchError(msg)
    return F.masked_nll(F.log_softmax(scores), gold, ignore=IGNORE_LABEL)
