"""Parameterised layers built on :mod:`midistring.nn.tensor`."""
from __future__ import annotations

import math
from collections import OrderedDict

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Module:
    """Holds named parameters and child modules; parameter order is insertion order."""

    def __init__(self):
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()
        self._children: "OrderedDict[str, Module]" = OrderedDict()

    def param(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(value, requires_grad=True, name=name)
        self._params[name] = t
        return t

    def child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = ""):
        for name, p in self._params.items():
            yield prefix + name, p
        for cname, c in self._children.items():
            yield from c.named_parameters(f"{prefix}{cname}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, p.data) for k, p in self.named_parameters())

    def load_state_dict(self, state) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        extra = set(state) - set(own)
        if missing or extra:
            raise KeyError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, p in own.items():
            arr = np.asarray(state[k])
            if arr.shape != p.shape:
                raise ValueError(f"{k}: shape {arr.shape} != {p.shape}")
            p.data = arr.astype(p.dtype, copy=True)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def astype(self, dtype) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self


def kaiming_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def xavier_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def _bias_init(rng, n, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(n,))


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, init: str = "kaiming",
                 dtype=T.DEFAULT_DTYPE, zero_bias: bool = False, scale: float = 1.0):
        super().__init__()
        if init == "kaiming":
            w = kaiming_uniform(rng, (d_in, d_out), d_in)
        elif init == "xavier":
            w = xavier_uniform(rng, (d_in, d_out), d_in, d_out)
        else:
            raise ValueError(init)
        b = np.zeros(d_out) if zero_bias else _bias_init(rng, d_out, d_in)
        self.weight = self.param("weight", (w * scale).astype(dtype))
        self.bias = self.param("bias", b.astype(dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return T.linear(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator, dtype=T.DEFAULT_DTYPE):
        super().__init__()
        fan_in = c_in * 9
        self.weight = self.param("weight", kaiming_uniform(rng, (c_out, c_in, 3, 3), fan_in).astype(dtype))
        self.bias = self.param("bias", _bias_init(rng, c_out, fan_in).astype(dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int, dtype=T.DEFAULT_DTYPE):
        super().__init__()
        self.gamma = self.param("gamma", np.ones(d, dtype=dtype))
        self.beta = self.param("beta", np.zeros(d, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gamma, self.beta)


def causal_mask(t: int) -> np.ndarray:
    """True where query position i may attend to key position j (j <= i)."""
    return np.tril(np.ones((t, t), dtype=bool))


class MultiHeadAttention(Module):
    """Scaled dot-product attention over (B, T, D) inputs, heads split along D."""

    def __init__(self, d_model: int, heads: int, rng: np.random.Generator, dtype=T.DEFAULT_DTYPE):
        super().__init__()
        if d_model % heads:
            raise ValueError(f"d_model {d_model} not divisible by {heads} heads")
        self.d_model, self.heads, self.d_head = d_model, heads, d_model // heads
        for name in ("q", "k", "v", "o"):
            setattr(self, name, self.child(name, Linear(d_model, d_model, rng, "xavier", dtype, zero_bias=True)))
        self.last_weights = None

    def _split(self, x: Tensor) -> Tensor:
        b, t, _ = x.shape
        return x.reshape(b, t, self.heads, self.d_head).transpose(0, 2, 1, 3)

    def __call__(self, q_in: Tensor, kv_in: Tensor, causal: bool = False) -> Tensor:
        squeeze = q_in.ndim == 2
        if squeeze:
            q_in, kv_in = q_in.reshape(1, *q_in.shape), kv_in.reshape(1, *kv_in.shape)
        if q_in.shape[-1] != self.d_model or kv_in.shape[-1] != self.d_model:
            raise ValueError(f"attention inputs must have width {self.d_model}")
        b, tq, _ = q_in.shape
        tk = kv_in.shape[1]
        q, k, v = self._split(self.q(q_in)), self._split(self.k(kv_in)), self._split(self.v(kv_in))
        scores = T.mul(q @ k.transpose(0, 1, 3, 2), 1.0 / math.sqrt(self.d_head))
        mask = causal_mask(tq) if causal else None
        if causal and tq != tk:
            raise ValueError("causal attention needs equal query and key lengths")
        weights = T.softmax(scores, mask)
        self.last_weights = weights.data
        ctx = (weights @ v).transpose(0, 2, 1, 3).reshape(b, tq, self.d_model)
        out = self.o(ctx)
        return out.reshape(tq, self.d_model) if squeeze else out


class FeedForward(Module):
    def __init__(self, d_model: int, d_ff: int, rng: np.random.Generator, dtype=T.DEFAULT_DTYPE):
        super().__init__()
        self.up = self.child("up", Linear(d_model, d_ff, rng, "kaiming", dtype))
        self.down = self.child("down", Linear(d_ff, d_model, rng, "kaiming", dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return self.down(T.relu(self.up(x)))


def sinusoidal_positions(t: int, d: int) -> np.ndarray:
    pos = np.arange(t)[:, None]
    i = np.arange(0, d, 2)[None, :]
    angle = pos / np.power(10000.0, i / d)
    pe = np.zeros((t, d))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe
