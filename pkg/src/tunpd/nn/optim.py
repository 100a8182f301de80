"""AdamW with global-norm clipping, and the cosine schedule."""
from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidInput, NonFiniteGradient
from .params import ParamStore


def cosine_lr(step: float, total_steps: float, lr_max: float, lr_min: float) -> float:
    if total_steps <= 0:
        return lr_max
    if not 0 <= step <= total_steps:
        raise InvalidInput(f"step {step} outside [0, {total_steps}]")
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * step / total_steps))


def global_norm(grads) -> float:
    return math.sqrt(sum(float(np.dot(g.ravel(), g.ravel())) for g in grads))


def adamw_step(store: ParamStore, lr: float, weight_decay: float = 1e-4,
               betas=(0.9, 0.999), eps: float = 1e-8, clip: float | None = 1.0,
               grads: dict | None = None) -> float:
    """One AdamW update in place; returns the pre-clip gradient norm.

    ``grads`` defaults to each parameter's accumulated ``.grad`` (missing
    gradients count as zero). Clipping rescales all gradients together
    before the moment update. Weight decay is decoupled and skips
    parameters registered with ``decay=False``.
    """
    names = list(store.params)
    if grads is None:
        grads = {k: store.params[k].grad for k in names}
    g = {}
    for k in names:
        gk = grads.get(k)
        gk = np.zeros_like(store.params[k].data) if gk is None else np.asarray(gk, dtype=np.float64)
        if not np.all(np.isfinite(gk)):
            raise NonFiniteGradient(f"non-finite gradient for parameter {k!r}")
        g[k] = gk
    norm = global_norm(g.values())
    factor = clip / norm if clip is not None and norm > clip else 1.0

    b1, b2 = betas
    store.step += 1
    t = store.step
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for k in names:
        p = store.params[k].data
        gk = g[k] * factor
        m, v = store.m[k], store.v[k]
        m *= b1
        m += (1.0 - b1) * gk
        v *= b2
        v += (1.0 - b2) * gk * gk
        if weight_decay and store.decay[k]:
            p -= lr * weight_decay * p
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return norm
