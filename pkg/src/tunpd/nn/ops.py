"""Differentiable operations. Every op returns a Tensor wired into the tape.

Masks are boolean arrays (never tensors); ``True`` marks a valid row. Ops
that take a mask write exact zeros into padded rows so nothing downstream
can depend on pad contents.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, as_tensor, make


def _check(cond: bool, op: str, *shapes):
    if not cond:
        raise ShapeError(f"{op}: incompatible shapes {', '.join(str(s) for s in shapes)}")


def _row_mask(mask, lead_shape, op):
    if mask is None:
        return None
    m = np.asarray(mask, dtype=bool)
    _check(m.shape == tuple(lead_shape), op, m.shape, tuple(lead_shape))
    return m


# ---------------------------------------------------------------------------
# affine pieces

def matmul(x, w) -> Tensor:
    """``x @ w`` with ``x`` of shape (..., i) and ``w`` of shape (i, o)."""
    x, w = as_tensor(x), as_tensor(w)
    _check(w.ndim == 2 and x.ndim >= 1 and x.shape[-1] == w.shape[0], "matmul", x.shape, w.shape)
    out = x.data @ w.data

    def backward(g):
        if x.requires_grad:
            x.accumulate(g @ w.data.T)
        if w.requires_grad:
            w.accumulate(x.data.reshape(-1, w.shape[0]).T @ g.reshape(-1, w.shape[1]))

    return make(out, (x, w), backward, "matmul")


def add_bias(x, b) -> Tensor:
    x, b = as_tensor(x), as_tensor(b)
    _check(b.ndim == 1 and x.shape[-1] == b.shape[0], "add_bias", x.shape, b.shape)

    def backward(g):
        if x.requires_grad:
            x.accumulate(g)
        if b.requires_grad:
            b.accumulate(g.reshape(-1, b.shape[0]).sum(axis=0))

    return make(x.data + b.data, (x, b), backward, "add_bias")


def linear(x, w, b=None) -> Tensor:
    y = matmul(x, w)
    return y if b is None else add_bias(y, b)


def bmm(a, b) -> Tensor:
    """Batched product over matching leading axes: (..., n, k) @ (..., k, m)."""
    a, b = as_tensor(a), as_tensor(b)
    _check(a.ndim >= 2 and a.ndim == b.ndim and a.shape[:-2] == b.shape[:-2]
           and a.shape[-1] == b.shape[-2], "bmm", a.shape, b.shape)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g @ np.swapaxes(b.data, -1, -2))
        if b.requires_grad:
            b.accumulate(np.swapaxes(a.data, -1, -2) @ g)

    return make(a.data @ b.data, (a, b), backward, "bmm")


def scale(x, c: float) -> Tensor:
    x = as_tensor(x)
    return make(x.data * c, (x,), lambda g: x.accumulate(g * c), "scale")


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check(a.shape == b.shape, "add", a.shape, b.shape)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(g)

    return make(a.data + b.data, (a, b), backward, "add")


# ---------------------------------------------------------------------------
# shape plumbing

def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {x.shape} as {tuple(shape)}") from None
    return make(out, (x,), lambda g: x.accumulate(g.reshape(x.shape)), "reshape")


def transpose(x, axes) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    _check(sorted(axes) == list(range(x.ndim)), "transpose", x.shape, axes)
    inv = tuple(np.argsort(axes))
    return make(x.data.transpose(axes), (x,), lambda g: x.accumulate(g.transpose(inv)), "transpose")


def expand(x, n: int) -> Tensor:
    """(B, C) -> (B, n, C) by repetition."""
    x = as_tensor(x)
    _check(x.ndim == 2, "expand", x.shape)
    out = np.broadcast_to(x.data[:, None, :], (x.shape[0], n, x.shape[1])).copy()
    return make(out, (x,), lambda g: x.accumulate(g.sum(axis=1)), "expand")


def concat(xs, axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    ax = axis % xs[0].ndim
    for x in xs[1:]:
        _check(x.ndim == xs[0].ndim and all(
            x.shape[i] == xs[0].shape[i] for i in range(x.ndim) if i != ax),
            "concat", *[t.shape for t in xs])
    sizes = np.cumsum([x.shape[ax] for x in xs])[:-1]

    def backward(g):
        for x, part in zip(xs, np.split(g, sizes, axis=ax)):
            if x.requires_grad:
                x.accumulate(part)

    return make(np.concatenate([x.data for x in xs], axis=ax), xs, backward, "concat")


# ---------------------------------------------------------------------------
# nonlinearities

def relu(x) -> Tensor:
    x = as_tensor(x)
    on = x.data > 0
    return make(np.where(on, x.data, 0.0), (x,), lambda g: x.accumulate(g * on), "relu")


def softmax(x, axis: int = -1, mask=None) -> Tensor:
    """Softmax along ``axis``. Masked entries get weight exactly zero.

    ``mask`` must broadcast against ``x``. A slice with no valid entry
    returns all zeros rather than NaN.
    """
    x = as_tensor(x)
    if mask is None:
        z = x.data - x.data.max(axis=axis, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=axis, keepdims=True)
    else:
        m = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        shifted = np.where(m, x.data, -np.inf)
        top = shifted.max(axis=axis, keepdims=True)
        top = np.where(np.isfinite(top), top, 0.0)
        e = np.where(m, np.exp(np.where(m, x.data - top, 0.0)), 0.0)
        s = e.sum(axis=axis, keepdims=True)
        p = np.divide(e, s, out=np.zeros_like(e), where=s > 0)

    def backward(g):
        x.accumulate(p * (g - (g * p).sum(axis=axis, keepdims=True)))

    return make(p, (x,), backward, "softmax")


# ---------------------------------------------------------------------------
# pooling

def mean_pool(x, mask=None) -> Tensor:
    """(B, N, C) -> (B, C); divides by the number of valid rows (at least 1)."""
    x = as_tensor(x)
    _check(x.ndim == 3, "mean_pool", x.shape)
    m = _row_mask(mask, x.shape[:2], "mean_pool")
    if m is None:
        m = np.ones(x.shape[:2], dtype=bool)
    w = m / np.maximum(m.sum(axis=1, keepdims=True), 1)
    out = np.einsum("bn,bnc->bc", w, x.data)
    return make(out, (x,), lambda g: x.accumulate(w[:, :, None] * g[:, None, :]), "mean_pool")


def max_pool(x, mask=None) -> Tensor:
    """(B, N, C) -> (B, C); the gradient goes to the first maximising row."""
    x = as_tensor(x)
    _check(x.ndim == 3, "max_pool", x.shape)
    m = _row_mask(mask, x.shape[:2], "max_pool")
    vals = x.data if m is None else np.where(m[:, :, None], x.data, -np.inf)
    arg = vals.argmax(axis=1)
    out = np.take_along_axis(vals, arg[:, None, :], axis=1)[:, 0, :]
    out = np.where(np.isfinite(out), out, 0.0)
    if m is not None:
        empty = ~m.any(axis=1)
    else:
        empty = np.zeros(x.shape[0], dtype=bool)

    def backward(g):
        dx = np.zeros_like(x.data)
        gg = np.where(empty[:, None], 0.0, g)
        np.put_along_axis(dx, arg[:, None, :], gg[:, None, :], axis=1)
        x.accumulate(dx)

    return make(out, (x,), backward, "max_pool")


# ---------------------------------------------------------------------------
# normalisation and regularisation

def batchnorm(x, gamma, beta, running: dict, training: bool, mask=None,
              momentum: float = 0.1, eps: float = 1e-5) -> Tensor:
    """Batch normalisation over every leading axis (batch, or batch x points).

    ``running`` holds ``mean`` and ``var`` arrays that are updated in place
    during training (biased batch variance, exponential factor ``momentum``).
    Rows outside ``mask`` neither contribute statistics nor get outputs.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    c = x.shape[-1]
    _check(gamma.shape == (c,) and beta.shape == (c,), "batchnorm", x.shape, gamma.shape, beta.shape)
    m = _row_mask(mask, x.shape[:-1], "batchnorm")
    flat = x.data.reshape(-1, c)
    rows = np.ones(len(flat), dtype=bool) if m is None else m.reshape(-1)
    valid = flat[rows]

    if training and len(valid):
        mu = valid.mean(axis=0)
        var = valid.var(axis=0)
        running["mean"] *= 1.0 - momentum
        running["mean"] += momentum * mu
        running["var"] *= 1.0 - momentum
        running["var"] += momentum * var
    else:
        mu, var = running["mean"], running["var"]
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (valid - mu) * inv
    out = np.zeros_like(flat)
    out[rows] = xhat * gamma.data + beta.data
    batch_stats = training and len(valid) > 0

    def backward(g):
        gv = g.reshape(-1, c)[rows]
        if gamma.requires_grad:
            gamma.accumulate((gv * xhat).sum(axis=0))
        if beta.requires_grad:
            beta.accumulate(gv.sum(axis=0))
        if x.requires_grad:
            dxhat = gv * gamma.data
            if batch_stats:
                dv = inv * (dxhat - dxhat.mean(axis=0) - xhat * (dxhat * xhat).mean(axis=0))
            else:
                dv = dxhat * inv
            dx = np.zeros_like(flat)
            dx[rows] = dv
            x.accumulate(dx.reshape(x.shape))

    return make(out.reshape(x.shape), (x, gamma, beta), backward, "batchnorm")


def dropout_mask(shape, p: float, key) -> np.ndarray:
    """Keep-mask from a counter-based stream keyed by (seed, layer, step)."""
    seed, layer, step = (int(k) for k in key)
    bitgen = np.random.Philox(key=np.array([seed & (2 ** 64 - 1), layer], dtype=np.uint64),
                              counter=np.array([step, 0, 0, 0], dtype=np.uint64))
    return np.random.Generator(bitgen).random(shape) >= p


def dropout(x, p: float, training: bool, key=(0, 0, 0)) -> Tensor:
    """Inverted dropout; the identity in eval mode or when ``p == 0``."""
    x = as_tensor(x)
    if not training or p <= 0:
        return x
    if p >= 1:
        raise ValueError("dropout probability must be below 1")
    keep = dropout_mask(x.shape, p, key) / (1.0 - p)
    return make(x.data * keep, (x,), lambda g: x.accumulate(g * keep), "dropout")


# ---------------------------------------------------------------------------
# attention

def multihead_attention(x, wq, bq, wk, bk, wv, bv, wo, bo, heads: int, mask=None) -> Tensor:
    """Scaled dot-product self-attention over the rows of ``x`` (B, N, C).

    Keys outside ``mask`` receive zero weight. Scores are divided by
    sqrt(C / heads).
    """
    x = as_tensor(x)
    _check(x.ndim == 3, "multihead_attention", x.shape)
    b, n, c = x.shape
    _check(c % heads == 0, "multihead_attention", x.shape, f"heads={heads}")
    d = c // heads

    def split(t):
        return transpose(reshape(t, (b, n, heads, d)), (0, 2, 1, 3))

    q = split(linear(x, wq, bq))
    k = split(linear(x, wk, bk))
    v = split(linear(x, wv, bv))
    scores = scale(bmm(q, transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(d))
    key_mask = None
    if mask is not None:
        key_mask = _row_mask(mask, (b, n), "multihead_attention")[:, None, None, :]
    attn = softmax(scores, axis=-1, mask=key_mask)
    ctx = reshape(transpose(bmm(attn, v), (0, 2, 1, 3)), (b, n, c))
    return linear(ctx, wo, bo)
