"""Modules with named parameters: linear, normalization, embedding, convolution, attention."""

import math
from collections.abc import Iterator
from typing import Any

import numpy as np

from clozecheck.nn import functional as F
from clozecheck.nn.tensor import Tensor


class Parameter(Tensor):
    """Trainable tensor. Frozen parameters never require gradients."""

    def __init__(self, data: Any, frozen: bool = False) -> None:
        super().__init__(data, requires_grad=not frozen)
        self.frozen = frozen

    def freeze(self) -> None:
        self.frozen = True
        self.requires_grad = False
        self.grad = None

    def unfreeze(self) -> None:
        self.frozen = False
        self.requires_grad = True


class Module:
    """Base class; parameters and submodules are discovered from attributes.

    Attributes holding a ``Parameter``, a ``Module`` or a list of modules
    are walked in definition order, giving dotted names such as
    ``fusion.0.cross_attn.w_q.weight``.
    """

    training: bool = True

    def forward(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.forward(*args, **kwargs)

    def children(self) -> Iterator[tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, list | tuple):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield f"{prefix}{name}", value
        for name, child in self.children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def trainable_parameters(self) -> list[tuple[str, Parameter]]:
        return [(n, p) for n, p in self.named_parameters() if not p.frozen]

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def freeze(self) -> None:
        for p in self.parameters():
            p.freeze()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray], prefix: str = "") -> None:
        """Copy arrays into parameters named ``prefix + name``.

        Raises:
            KeyError: If a parameter is missing from ``state``.
            ValueError: If a stored array has the wrong shape.
        """
        for name, p in self.named_parameters():
            key = prefix + name
            if key not in state:
                msg = f"Missing parameter {key!r}"
                raise KeyError(msg)
            value = np.asarray(state[key])
            if value.shape != p.shape:
                msg = f"Parameter {key!r} has shape {value.shape}, expected {p.shape}"
                raise ValueError(msg)
            p.data = value.astype(p.data.dtype)


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int, shape: tuple[int, ...]) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Linear(Module):
    def __init__(
        self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True
    ) -> None:
        self.weight = Parameter(xavier(rng, in_features, out_features, (in_features, out_features)))
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        out = x @ self.weight
        return out + self.bias if self.bias is not None else out


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5) -> None:
        self.gamma = Parameter(np.ones(dim))
        self.beta = Parameter(np.zeros(dim))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gamma, self.beta, self.eps)


class Embedding(Module):
    def __init__(self, num: int, dim: int, rng: np.random.Generator) -> None:
        self.weight = Parameter(rng.normal(0.0, 0.02, size=(num, dim)))

    def forward(self, ids: np.ndarray) -> Tensor:
        return F.embed(self.weight, ids)


class Dropout(Module):
    def __init__(self, p: float, rng: np.random.Generator) -> None:
        self.p = p
        self.rng = rng

    def forward(self, x: Tensor) -> Tensor:
        return F.dropout(x, self.p, self.rng, training=self.training)


class Conv2d(Module):
    """3x3 (by default) same-padded convolution with He initialization."""

    def __init__(
        self, in_channels: int, out_channels: int, rng: np.random.Generator, kernel: int = 3
    ) -> None:
        fan_in = in_channels * kernel * kernel
        self.weight = Parameter(
            rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(out_channels, in_channels, kernel, kernel))
        )
        self.bias = Parameter(np.zeros(out_channels))
        self.padding = kernel // 2

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, padding=self.padding)


class FeedForward(Module):
    """``max(0, x W_1 + b_1) W_2 + b_2`` with dropout on the hidden layer."""

    def __init__(self, dim: int, hidden: int, dropout: float, rng: np.random.Generator) -> None:
        self.w_1 = Linear(dim, hidden, rng)
        self.w_2 = Linear(hidden, dim, rng)
        self.dropout = Dropout(dropout, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.w_2(self.dropout(F.relu(self.w_1(x))))


class MultiHeadAttention(Module):
    """Scaled dot-product attention with per-head projections.

    Scores are divided by ``sqrt(dim / heads)``. The most recent attention
    weights ``[B, heads, L_q, L_k]`` are kept in ``last_attention``. That
    slot is shared across threads; ``attend`` returns the weights of one call.
    """

    def __init__(self, dim: int, heads: int, dropout: float, rng: np.random.Generator) -> None:
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.w_q = Linear(dim, dim, rng)
        self.w_k = Linear(dim, dim, rng)
        self.w_v = Linear(dim, dim, rng)
        self.w_o = Linear(dim, dim, rng)
        self.dropout = Dropout(dropout, rng)
        self.last_attention: np.ndarray | None = None

    def split_heads(self, x: Tensor) -> Tensor:
        b, length, _ = x.shape
        return x.reshape(b, length, self.heads, self.head_dim).transpose(0, 2, 1, 3)

    def forward(
        self,
        query: Tensor,
        key: Tensor,
        value: Tensor,
        mask: np.ndarray | None = None,
        allow_empty_rows: bool = False,
    ) -> Tensor:
        return self.attend(query, key, value, mask, allow_empty_rows)[0]

    def attend(
        self,
        query: Tensor,
        key: Tensor,
        value: Tensor,
        mask: np.ndarray | None = None,
        allow_empty_rows: bool = False,
    ) -> tuple[Tensor, np.ndarray]:
        """Attend from ``query`` ``[B, L_q, dim]`` to ``key``/``value`` ``[B, L_k, dim]``.

        Returns the projected context and the attention weights of this call.

        Args:
            mask: Additive {0, -inf} mask broadcastable to ``[B, 1, L_q, L_k]``.
            allow_empty_rows: Give fully masked query rows zero weights.
        """
        b, lq, _ = query.shape
        q = self.split_heads(self.w_q(query))
        k = self.split_heads(self.w_k(key))
        v = self.split_heads(self.w_v(value))

        scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(self.head_dim))
        weights = F.masked_softmax(scores, mask, allow_empty_rows=allow_empty_rows)
        attention = weights.data.copy()
        self.last_attention = attention

        context = self.dropout(weights) @ v
        merged = context.transpose(0, 2, 1, 3).reshape(b, lq, self.dim)
        return self.w_o(merged), attention


class TransformerBlock(Module):
    """Post-norm block: ``LN(x + SA(x))`` then ``LN(x + FFN(x))``."""

    def __init__(
        self, dim: int, heads: int, ffn_dim: int, dropout: float, rng: np.random.Generator
    ) -> None:
        self.attn = MultiHeadAttention(dim, heads, dropout, rng)
        self.norm_1 = LayerNorm(dim)
        self.ffn = FeedForward(dim, ffn_dim, dropout, rng)
        self.norm_2 = LayerNorm(dim)
        self.dropout = Dropout(dropout, rng)

    def forward(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        x = self.norm_1(x + self.dropout(self.attn(x, x, x, mask, allow_empty_rows=True)))
        return self.norm_2(x + self.dropout(self.ffn(x)))
