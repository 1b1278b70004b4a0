"""Central finite-difference check of analytic gradients."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def gradient_check(fn: Callable[[], Tensor], wrt: Sequence[Tensor], eps: float = 1e-5,
                   max_entries: int | None = None, seed: int = 0, floor: float = 1e-5) -> float:
    """Max over checked entries of |analytic - numeric| / max(|analytic|, |numeric|, floor).

    The floor keeps exactly-zero gradients (e.g. an attention key bias, which
    softmax cancels) from turning central-difference roundoff into a huge
    relative error.

    ``fn`` recomputes a scalar from the current values of ``wrt``; tensors must be
    float64.  ``max_entries`` caps how many entries per tensor are probed (chosen
    with a seeded generator); None checks all of them.
    """
    for t in wrt:
        if t.dtype != np.float64:
            raise TypeError("gradient checks need float64 tensors")
        t.data = np.ascontiguousarray(t.data)
        t.grad = None
    out = fn()
    out.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in wrt]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t, ga in zip(wrt, analytic):
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            up = float(fn().data)
            flat[i] = orig - eps
            down = float(fn().data)
            flat[i] = orig
            num = (up - down) / (2 * eps)
            a = float(ga.reshape(-1)[i])
            err = abs(a - num) / max(abs(a), abs(num), floor)
            worst = max(worst, err)
    return worst
