"""Reverse-mode autodiff over numpy arrays.

Each differentiable op builds a ``Tensor`` holding its parents and a closure
that pushes the output gradient back to them.  ``backward`` walks the graph
in reverse topological order.  Only the operations the two models need are
provided.
"""
from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float32


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(data, dtype=dtype) if dtype is not None else np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes)

    def sum(self):
        return total(self)

    def mean(self):
        return mean(self)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype or DEFAULT_DTYPE))


def _result(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    return _result(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    return _result(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    return _result(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matmul with numpy broadcasting over leading axes."""

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(a.data @ b.data, (a, b), backward)


def reshape(a: Tensor, shape) -> Tensor:
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes) if axes else tuple(reversed(range(a.ndim)))
    inv = np.argsort(axes)
    return _result(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def total(a: Tensor) -> Tensor:
    return _result(a.data.sum(), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    return _result(a.data.mean(), (a,), lambda g: (np.full(a.shape, g / n, dtype=a.dtype),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _result(np.maximum(a.data, 0), (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _result(out, (a,), lambda g: (g * out * (1.0 - out),))


def softmax(a: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over the last axis; ``mask`` False entries get probability 0."""
    x = a.data
    if mask is not None:
        x = np.where(mask, x, -np.inf)
    x = x - x.max(axis=-1, keepdims=True)
    e = np.exp(x)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return _result(p, (a,), backward)


def layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        gx_hat = g * gamma.data
        gx = inv * (gx_hat - gx_hat.mean(axis=-1, keepdims=True)
                    - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True))
        ggamma = _unbroadcast(g * xhat, gamma.shape)
        gbeta = _unbroadcast(g, beta.shape)
        return gx, ggamma, gbeta

    return _result(out, (a, gamma, beta), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` with ``weight`` shaped (in, out)."""
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-rate); identity in eval mode."""
    if not train or rate <= 0.0:
        return a
    keep = (rng.random(a.shape) >= rate).astype(a.dtype) / (1.0 - rate)
    return _result(a.data * keep, (a,), lambda g: (g * keep,))


# -- convolution and pooling -------------------------------------------------------


def conv2d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """3x3 cross-correlation with padding 1 on (N, C, H, W) input.

    ``weight`` is (C_out, C_in, 3, 3).  A 3-D input is treated as a batch of one.
    """
    squeeze = x.ndim == 3
    xd = x.data[None] if squeeze else x.data
    n, c, h, w = xd.shape
    c_out, c_in, kh, kw = weight.shape
    if c_in != c or (kh, kw) != (3, 3):
        raise ValueError(f"conv2d shape mismatch: input {xd.shape}, kernels {weight.shape}")
    padded = np.pad(xd, ((0, 0), (0, 0), (1, 1), (1, 1)))
    # columns laid out (N, C*9, H*W) so the product lands directly in NCHW order
    cols = np.empty((n, c, 9, h, w), dtype=xd.dtype)
    for k in range(9):
        i, j = divmod(k, 3)
        cols[:, :, k] = padded[:, :, i:i + h, j:j + w]
    cols = cols.reshape(n, c * 9, h * w)
    wmat = weight.data.reshape(c_out, c * 9)
    out = (wmat @ cols + bias.data[:, None]).reshape(n, c_out, h, w)
    if squeeze:
        out = out[0]

    def backward(g):
        gm = (g[None] if squeeze else g).reshape(n, c_out, h * w)
        gw = (gm @ cols.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape)
        gb = gm.sum(axis=(0, 2))
        if not x.requires_grad:
            return None, gw, gb
        gcols = (wmat.T @ gm).reshape(n, c, 9, h, w)
        gpad = np.zeros_like(padded)
        for k in range(9):
            i, j = divmod(k, 3)
            gpad[:, :, i:i + h, j:j + w] += gcols[:, :, k]
        gx = gpad[:, :, 1:-1, 1:-1]
        return (gx[0] if squeeze else gx), gw, gb

    return _result(out, (x, weight, bias), backward)


def maxpool2d(x: Tensor) -> Tensor:
    """2x2 max pooling, stride 2, on (..., H, W); gradient goes to the first maximal entry."""
    xd = x.data
    h, w = xd.shape[-2:]
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2d needs even spatial dims, got {h}x{w}")
    # window entries in row-major order, which fixes the tie rule
    quads = [xd[..., 0::2, 0::2], xd[..., 0::2, 1::2], xd[..., 1::2, 0::2], xd[..., 1::2, 1::2]]
    out = np.maximum(np.maximum(quads[0], quads[1]), np.maximum(quads[2], quads[3]))

    def backward(g):
        gx = np.zeros_like(xd)
        taken = np.zeros(out.shape, dtype=bool)
        for q, (di, dj) in zip(quads, ((0, 0), (0, 1), (1, 0), (1, 1))):
            hit = (q == out) & ~taken
            taken |= hit
            gx[..., di::2, dj::2] = g * hit
        return (gx,)

    return _result(out, (x,), backward)


# -- losses ---------------------------------------------------------------------------


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.data
    n, k = z.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match logits {z.shape}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise ValueError(f"label out of range for {k} classes")
    shifted = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsum
    loss = -logp[np.arange(n), labels].mean()

    def backward(g):
        grad = np.exp(logp)
        grad[np.arange(n), labels] -= 1.0
        return (grad * (g / n),)

    return _result(np.asarray(loss, dtype=z.dtype), (logits,), backward)


BCE_EPS = 1e-7


def binary_cross_entropy(probs: Tensor, targets) -> Tensor:
    """Mean of -[y ln p + (1-y) ln(1-p)] with p clamped to [eps, 1-eps]."""
    y = np.asarray(targets, dtype=probs.dtype)
    if y.shape != probs.shape:
        raise ValueError(f"target shape {y.shape} does not match probabilities {probs.shape}")
    raw = probs.data
    p = np.clip(raw, BCE_EPS, 1.0 - BCE_EPS)
    loss = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).mean()
    inside = (raw > BCE_EPS) & (raw < 1.0 - BCE_EPS)

    def backward(g):
        grad = (p - y) / (p * (1.0 - p)) / y.size
        return (grad * inside * g,)

    return _result(np.asarray(loss, dtype=raw.dtype), (probs,), backward)
