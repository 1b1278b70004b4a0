"""Minimal numpy autodiff engine: tensors, layers, Adam, gradient checks, checkpoints."""
from .checkpoint import Checkpoint, CheckpointError
from .gradcheck import gradient_check
from .layers import Conv2d, FeedForward, LayerNorm, Linear, Module, MultiHeadAttention
from .optim import AdamState, adam_step
from .tensor import Tensor

__all__ = [
    "Checkpoint", "CheckpointError", "gradient_check", "Conv2d", "FeedForward", "LayerNorm",
    "Linear", "Module", "MultiHeadAttention", "AdamState", "adam_step", "Tensor",
]
