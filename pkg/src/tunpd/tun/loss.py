from __future__ import annotations

import numpy as np

from .. import nn
from ..errors import EmptyBatch, ShapeError


def _log_softmax(s: np.ndarray) -> np.ndarray:
    top = s.max(axis=-1, keepdims=True)
    return s - top - np.log(np.exp(s - top).sum(axis=-1, keepdims=True))


def focal_loss(logits, labels, mask, cfg=None, *, alpha=None, gamma=None, w0=None, w1=None) -> nn.Tensor:
    """Class-weighted focal loss averaged over valid rows.

    Per row: w[y] * alpha * (1 - p_t)^gamma * (-log p_t) with p_t the softmax
    probability of the true class. Padded rows are dropped before any
    arithmetic, so extra padding changes nothing.
    """
    logits = nn.as_tensor(logits)
    alpha = getattr(cfg, "alpha", 1.0) if alpha is None else alpha
    gamma = getattr(cfg, "gamma", 2.0) if gamma is None else gamma
    w0 = getattr(cfg, "w0", 1.0) if w0 is None else w0
    w1 = getattr(cfg, "w1", 2.0) if w1 is None else w1

    s = logits.data
    y = np.asarray(labels, dtype=bool)
    m = np.asarray(mask, dtype=bool)
    if s.shape[-1] != 2 or y.shape != s.shape[:-1] or m.shape != s.shape[:-1]:
        raise ShapeError(f"focal_loss: logits {s.shape}, labels {y.shape}, mask {m.shape}")
    count = int(m.sum())
    if count == 0:
        raise EmptyBatch("focal_loss: every row is masked")

    sv = s[m]
    yv = y[m].astype(np.int64)
    logp = _log_softmax(sv)
    p = np.exp(logp)
    logpt = logp[np.arange(count), yv]
    pt = np.exp(logpt)
    one_minus = -np.expm1(logpt)
    w = np.where(yv == 1, w1, w0) * alpha
    focal = one_minus ** gamma if gamma else np.ones_like(pt)
    loss = float((w * focal * -logpt).sum() / count)

    def backward(g):
        # d loss_i / d logpt, then through log-softmax
        if gamma:
            with np.errstate(divide="ignore", invalid="ignore"):
                lead = np.where(one_minus > 0, gamma * one_minus ** (gamma - 1) * pt * logpt, 0.0)
            dlogpt = w * (lead - focal)
        else:
            dlogpt = -w
        onehot = np.zeros_like(sv)
        onehot[np.arange(count), yv] = 1.0
        dsv = (dlogpt / count)[:, None] * (onehot - p)
        ds = np.zeros_like(s)
        ds[m] = dsv * float(g)
        logits.accumulate(ds)

    return nn.tensor.make(np.array(loss), (logits,), backward, "focal_loss")


def cross_entropy(logits, labels, mask) -> float:
    """Masked mean cross-entropy; reference for the gamma = 0 case."""
    s = np.asarray(getattr(logits, "data", logits))
    m = np.asarray(mask, dtype=bool)
    y = np.asarray(labels, dtype=bool)[m].astype(np.int64)
    logp = _log_softmax(s[m])
    return float(-logp[np.arange(len(y)), y].mean())
