"""Adam with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr: float = 1e-3, **kw) -> "AdamState":
        st = cls(lr=lr, **kw)
        st.m = [np.zeros_like(p.data) for p in params]
        st.v = [np.zeros_like(p.data) for p in params]
        return st


def adam_step(params: list[Tensor], state: AdamState, grads=None) -> AdamState:
    """Apply one update in place; ``grads`` defaults to each parameter's ``.grad``."""
    if grads is None:
        grads = [p.grad for p in params]
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ValueError("parameter, gradient and moment lists differ in length")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.shape or state.m[i].shape != p.shape:
            raise ValueError(f"shape mismatch for parameter {i}: {p.shape} vs {g.shape}")
        m = state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        v = state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        step = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data = (p.data - step).astype(p.dtype, copy=False)
    return state
