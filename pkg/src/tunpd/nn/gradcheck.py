"""Central finite-difference check against the tape."""
from __future__ import annotations

import numpy as np

from .tensor import Tensor

# central differences at h=1e-5 carry ~1e-11*|f| of rounding noise, so
# gradients below this floor are compared in absolute terms
ABS_FLOOR = 1e-5


def rel_error(a: np.ndarray, b: np.ndarray, floor: float = ABS_FLOOR) -> np.ndarray:
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def gradcheck(fn, inputs, n_coords: int = 50, h: float = 1e-5, seed: int = 0):
    """Compare backward gradients of scalar ``fn()`` with central differences.

    ``inputs`` are leaf tensors that ``fn`` reads; ``n_coords`` coordinates
    are sampled uniformly over all of them. Returns ``(max_rel_error,
    details)`` where details lists (input index, flat index, analytic,
    numeric).
    """
    for t in inputs:
        t.grad = None
    out = fn()
    out.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]

    sizes = np.array([t.data.size for t in inputs])
    total = int(sizes.sum())
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(n_coords, total), replace=False)
    bounds = np.cumsum(sizes)
    details = []
    worst = 0.0
    for flat in np.sort(picks):
        which = int(np.searchsorted(bounds, flat, side="right"))
        idx = int(flat - (bounds[which - 1] if which else 0))
        data = inputs[which].data.reshape(-1)
        orig = data[idx]
        data[idx] = orig + h
        up = fn().data.item()
        data[idx] = orig - h
        down = fn().data.item()
        data[idx] = orig
        num = (up - down) / (2 * h)
        ana = float(analytic[which].reshape(-1)[idx])
        err = float(rel_error(np.array(ana), np.array(num)))
        worst = max(worst, err)
        details.append((which, idx, ana, num))
    return worst, details


def projected(fn, shape_seed: int = 1):
    """Wrap a tensor-valued ``fn`` into a scalar via a fixed random projection."""
    from . import ops

    cache = {}

    def scalar():
        out = fn()
        if "w" not in cache:
            cache["w"] = np.random.default_rng(shape_seed).normal(size=out.shape)
        w = cache["w"]
        flat = ops.reshape(out, (-1,))
        return ops.matmul(ops.reshape(flat, (1, -1)), Tensor(w.reshape(-1, 1)))

    return scalar
