"""Classical significance rules for diagram points."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInput
from .features import top_persistence_order

METHODS = ("topk", "two_means", "confidence_set")


@dataclass
class BaselineResult:
    method: str
    labels: np.ndarray
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.labels)


def _diagram(diagram) -> np.ndarray:
    d = np.asarray(diagram, dtype=np.float64)
    return np.zeros((0, 2)) if d.size == 0 else d.reshape(-1, d.shape[-1])[:, :2]


def topk_baseline(diagram, k: int) -> BaselineResult:
    """The ``k`` most persistent points; ties go to the smaller birth, then the earlier row."""
    if k < 0:
        raise InvalidInput(f"k must be non-negative, got {k}")
    d = _diagram(diagram)
    labels = np.zeros(len(d), dtype=bool)
    labels[top_persistence_order(d)[:k]] = True
    return BaselineResult("topk", labels, {"k": int(k)})


def two_means_split(values: np.ndarray):
    """Exact 1-D 2-means: the cut between sorted values with least total SSE.

    Returns ``(threshold, low_mean, high_mean)`` or ``None`` when the values
    do not form two clusters (fewer than two points, or all equal). Points
    with value >= threshold form the upper cluster. Cuts are only placed
    between distinct values, and the lowest-SSE cut wins (the first one on
    ties).
    """
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = len(v)
    if n < 2 or v[0] == v[-1]:
        return None
    c1 = np.cumsum(v)
    c2 = np.cumsum(v * v)
    k = np.arange(1, n)  # size of the lower cluster
    lo_sum, lo_sq = c1[:-1], c2[:-1]
    hi_sum, hi_sq = c1[-1] - lo_sum, c2[-1] - lo_sq
    sse = (lo_sq - lo_sum ** 2 / k) + (hi_sq - hi_sum ** 2 / (n - k))
    sse = np.where(v[1:] > v[:-1], sse, np.inf)
    best = int(np.argmin(sse))
    kk = best + 1
    return float(v[kk]), float(lo_sum[best] / kk), float(hi_sum[best] / (n - kk))


def two_means_baseline(diagram) -> BaselineResult:
    """Cluster persistence values into two groups; the higher-mean group is significant."""
    d = _diagram(diagram)
    pers = d[:, 1] - d[:, 0]
    split = two_means_split(pers)
    if split is None:
        return BaselineResult("two_means", np.zeros(len(d), dtype=bool), {"centers": None})
    thr, lo, hi = split
    return BaselineResult("two_means", pers >= thr, {"centers": [lo, hi], "threshold": thr})


def bootstrap_hausdorff(cloud, B: int = 100, seed: int = 0) -> np.ndarray:
    """Hausdorff distances between the cloud and B resamples of itself.

    A resample is a subset of the cloud, so the distance reduces to the
    farthest any original point sits from the resample.
    """
    c = np.asarray(cloud, dtype=np.float64)
    if c.ndim != 2 or len(c) == 0:
        raise InvalidInput("bootstrap needs a non-empty (n, d) cloud")
    if B < 1:
        raise InvalidInput(f"bootstrap count must be at least 1, got {B}")
    n = len(c)
    out = np.empty(B)
    for b, ss in enumerate(np.random.SeedSequence(seed).spawn(B)):
        idx = np.unique(np.random.default_rng(ss).integers(0, n, n))
        dist, _ = cKDTree(c[idx]).query(c, k=1)
        out[b] = dist.max()
    return out


def confidence_set_baseline(diagram, cloud, level: float = 0.5, B: int = 100,
                            seed: int = 0) -> BaselineResult:
    """Band of half-width ``c`` (a bootstrap quantile) around the diagonal.

    A point is significant iff its persistence exceeds 2c.
    """
    if not 0 < level < 1:
        raise InvalidInput(f"level must lie in (0, 1), got {level}")
    d = _diagram(diagram)
    dists = bootstrap_hausdorff(cloud, B, seed)
    c = float(np.quantile(dists, level, method="inverted_cdf"))
    labels = (d[:, 1] - d[:, 0]) > 2 * c
    return BaselineResult("confidence_set", labels,
                          {"c": c, "level": float(level), "B": int(B), "seed": int(seed)})


def run_baseline(method: str, diagram, cloud=None, k: int = 1, level: float = 0.5,
                 B: int = 100, seed: int = 0) -> BaselineResult:
    m = {"2means": "two_means", "cs": "confidence_set"}.get(method, method)
    if m == "topk":
        return topk_baseline(diagram, k)
    if m == "two_means":
        return two_means_baseline(diagram)
    if m == "confidence_set":
        if cloud is None:
            raise InvalidInput("the confidence set needs the point cloud")
        return confidence_set_baseline(diagram, cloud, level, B, seed)
    raise InvalidInput(f"unknown baseline {method!r}; choose from topk, 2means, cs")
