"""Encoder-decoder transformer over 64x128 melody phrase rolls."""
from __future__ import annotations

import numpy as np

from ..nn import tensor as T
from ..nn.layers import FeedForward, LayerNorm, Linear, Module, MultiHeadAttention, sinusoidal_positions
from ..nn.tensor import Tensor

OUTPUT_INIT_SCALE = 0.1  # keeps initial sigmoid outputs near 0.5


class EncoderLayer(Module):
    def __init__(self, d, heads, d_ff, rng, dtype):
        super().__init__()
        self.attn = self.child("attn", MultiHeadAttention(d, heads, rng, dtype))
        self.norm1 = self.child("norm1", LayerNorm(d, dtype))
        self.ff = self.child("ff", FeedForward(d, d_ff, rng, dtype))
        self.norm2 = self.child("norm2", LayerNorm(d, dtype))

    def __call__(self, x):
        x = self.norm1(x + self.attn(x, x))
        return self.norm2(x + self.ff(x))


class DecoderLayer(Module):
    def __init__(self, d, heads, d_ff, rng, dtype):
        super().__init__()
        self.self_attn = self.child("self_attn", MultiHeadAttention(d, heads, rng, dtype))
        self.norm1 = self.child("norm1", LayerNorm(d, dtype))
        self.cross_attn = self.child("cross_attn", MultiHeadAttention(d, heads, rng, dtype))
        self.norm2 = self.child("norm2", LayerNorm(d, dtype))
        self.ff = self.child("ff", FeedForward(d, d_ff, rng, dtype))
        self.norm3 = self.child("norm3", LayerNorm(d, dtype))

    def __call__(self, y, memory):
        y = self.norm1(y + self.self_attn(y, y, causal=True))
        y = self.norm2(y + self.cross_attn(y, memory))
        return self.norm3(y + self.ff(y))


def shift_right(target: np.ndarray) -> np.ndarray:
    """Prepend an all-zero start row and drop the last step (works on (..., T, P))."""
    target = np.asarray(target)
    out = np.zeros_like(target)
    out[..., 1:, :] = target[..., :-1, :]
    return out


class MelodyTransformer(Module):
    def __init__(self, n_pitches: int = 128, d_model: int = 128, heads: int = 4, d_ff: int = 512,
                 layers: int = 2, steps: int = 64, seed: int = 0, dtype=T.DEFAULT_DTYPE):
        super().__init__()
        self.config = {"n_pitches": n_pitches, "d_model": d_model, "heads": heads, "d_ff": d_ff,
                       "layers": layers, "steps": steps, "seed": seed}
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng([seed, 3])
        self.embed = self.child("embed", Linear(n_pitches, d_model, rng, "xavier", dtype))
        self.encoder = [self.child(f"enc{i}", EncoderLayer(d_model, heads, d_ff, rng, dtype)) for i in range(layers)]
        self.decoder = [self.child(f"dec{i}", DecoderLayer(d_model, heads, d_ff, rng, dtype)) for i in range(layers)]
        self.out = self.child("out", Linear(d_model, n_pitches, rng, "xavier", dtype, zero_bias=True,
                                            scale=OUTPUT_INIT_SCALE))
        self.positions = sinusoidal_positions(steps, d_model).astype(dtype)
        # a near one-hot roll row embeds to ~0.1 per dim; without the usual
        # sqrt(d) scale the positions drown out the pitch content
        self.embed_scale = float(np.sqrt(d_model))

    def _as_batch(self, x) -> Tensor:
        if isinstance(x, Tensor):
            return x if x.ndim == 3 else x.reshape(1, *x.shape)
        x = np.asarray(x, dtype=self.dtype)
        steps, pitches = self.config["steps"], self.config["n_pitches"]
        if x.shape[-2:] != (steps, pitches):
            raise ValueError(f"expected (..., {steps}, {pitches}) phrase rolls, got {x.shape}")
        return Tensor(x if x.ndim == 3 else x[None])

    def encode(self, source) -> Tensor:
        x = self.embed(self._as_batch(source)) * self.embed_scale + self.positions
        for layer in self.encoder:
            x = layer(x)
        return x

    def decode(self, decoder_input, memory: Tensor) -> Tensor:
        y = self.embed(self._as_batch(decoder_input)) * self.embed_scale + self.positions
        for layer in self.decoder:
            y = layer(y, memory)
        return T.sigmoid(self.out(y))

    def __call__(self, source, target) -> Tensor:
        """Teacher-forced probabilities (B, T, P); ``target`` is shifted right internally."""
        tgt = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=self.dtype)
        return self.decode(shift_right(tgt), self.encode(source))


def transformer_forward(model: MelodyTransformer, source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """One 64x128 phrase pair -> 64x128 probability matrix."""
    return model(np.asarray(source)[None], np.asarray(target)[None]).data[0]
