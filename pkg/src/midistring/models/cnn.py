"""Two-head piano-roll CNN for genre and style classification."""
from __future__ import annotations

import numpy as np

from ..nn import tensor as T
from ..nn.layers import Conv2d, Linear, Module
from ..nn.tensor import Tensor

DROPOUT = 0.5


class CnnClassifier(Module):
    """conv(4->32) relu pool, conv(32->64) relu pool, fc(->128) relu dropout, two linear heads."""

    def __init__(self, n_genres: int = 13, n_styles: int = 25, size: int = 128, seed: int = 0,
                 dtype=T.DEFAULT_DTYPE, channels: int = 4):
        super().__init__()
        if size % 4:
            raise ValueError("input size must be divisible by 4")
        self.config = {"n_genres": n_genres, "n_styles": n_styles, "size": size, "seed": seed,
                       "channels": channels}
        self.seed = seed
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng([seed, 1])
        self.conv1 = self.child("conv1", Conv2d(channels, 32, rng, dtype))
        self.conv2 = self.child("conv2", Conv2d(32, 64, rng, dtype))
        self.flat_width = 64 * (size // 4) ** 2
        self.fc = self.child("fc", Linear(self.flat_width, 128, rng, "kaiming", dtype))
        # small head init keeps the initial loss near ln(n_genres) + ln(n_styles)
        self.genre_head = self.child("genre_head", Linear(128, n_genres, rng, "xavier", dtype, zero_bias=True, scale=0.01))
        self.style_head = self.child("style_head", Linear(128, n_styles, rng, "xavier", dtype, zero_bias=True, scale=0.01))
        self.shapes: dict[str, tuple] = {}

    def __call__(self, x, train: bool = False, step: int = 0) -> tuple[Tensor, Tensor]:
        """``x``: (N, 4, size, size) array or Tensor. Returns (genre logits, style logits)."""
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.dtype))
        if x.ndim != 4 or x.shape[1:] != (self.config["channels"], self.config["size"], self.config["size"]):
            raise ValueError(f"expected (N, {self.config['channels']}, {self.config['size']}, "
                             f"{self.config['size']}) input, got {x.shape}")
        # relu and max commute, so pooling first does the same work on a quarter of the cells
        h = T.relu(T.maxpool2d(self.conv1(x)))
        self.shapes["pool1"] = h.shape[1:]
        h = T.relu(T.maxpool2d(self.conv2(h)))
        self.shapes["pool2"] = h.shape[1:]
        h = h.reshape(h.shape[0], self.flat_width)
        self.shapes["flat"] = h.shape[1:]
        h = T.relu(self.fc(h))
        self.shapes["fc"] = h.shape[1:]
        rng = np.random.default_rng([self.seed, 2, step]) if train else None
        h = T.dropout(h, DROPOUT, rng, train)
        return self.genre_head(h), self.style_head(h)


def cnn_forward(model: CnnClassifier, roll: np.ndarray, train_mode: bool = False, step: int = 0):
    """Single 4x128x128 roll -> (genre logits, style logits) as 1-D arrays."""
    roll = np.asarray(roll)
    g, s = model(roll[None], train=train_mode, step=step)
    return g.data[0], s.data[0]


def predict(model: CnnClassifier, rolls: np.ndarray, batch_size: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode argmax predictions for a stack of rolls."""
    gs, ss = [], []
    for i in range(0, len(rolls), batch_size):
        g, s = model(np.asarray(rolls[i:i + batch_size], dtype=model.dtype), train=False)
        gs.append(g.data.argmax(axis=1))
        ss.append(s.data.argmax(axis=1))
    if not gs:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(gs), np.concatenate(ss)
