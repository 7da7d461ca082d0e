"""Numpy tensor substrate: autodiff, operations, layers, AdamW and checkpoints."""

from clozecheck.nn.tensor import Function
from clozecheck.nn.tensor import Tensor
from clozecheck.nn.tensor import default_dtype
from clozecheck.nn.tensor import no_grad


__all__ = ["Function", "Tensor", "default_dtype", "no_grad"]
