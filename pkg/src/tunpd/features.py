"""Model inputs: per-point diagram descriptors, auxiliary statistics, caps."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .complex import unique_points
from .errors import InvalidInput

LOG_EPS = 1e-12
LOG_CLAMP = 20.0
KNN_K = 10

AUX_GROUPS = {
    "pd_stats": ("n_pd", "mean_pers", "std_pers", "max_pers", "mean_birth"),
    "pc_stats": ("n_pc", "mean_axis_std", "mean_norm"),
    "bbox": ("extent_x", "extent_y", "extent_z"),
    "noise": ("knn_std", "pca_ratio", "density_cv"),
}
AUX_NAMES = tuple(n for g in AUX_GROUPS.values() for n in g)


@dataclass
class FeatureBundle:
    pd_feats: np.ndarray  # (N_pd, 4): birth, death, persistence, log ratio
    mask: np.ndarray  # (N_pd,) bool
    aux: np.ndarray  # (A,)
    cloud: np.ndarray  # (N_pc, 3)
    labels: np.ndarray | None = None  # (N_pd,) bool
    # rows of the input diagram that ended up in each retained slot
    source_index: np.ndarray | None = None

    def to_json(self) -> str:
        obj = {
            "pd_feats": self.pd_feats.tolist(),
            "mask": [int(m) for m in self.mask],
            "aux": self.aux.tolist(),
            "cloud": self.cloud.tolist(),
            "labels": None if self.labels is None else [int(x) for x in self.labels],
        }
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "FeatureBundle":
        obj = json.loads(text)
        labels = obj.get("labels")
        return cls(
            pd_feats=np.asarray(obj["pd_feats"], dtype=np.float64).reshape(-1, 4),
            mask=np.asarray(obj["mask"], dtype=bool),
            aux=np.asarray(obj["aux"], dtype=np.float64),
            cloud=np.asarray(obj["cloud"], dtype=np.float64).reshape(-1, 3),
            labels=None if labels is None else np.asarray(labels, dtype=bool),
        )


def _as_diagram(diagram) -> np.ndarray:
    d = np.asarray(diagram, dtype=np.float64)
    if d.size == 0:
        return np.zeros((0, 2))
    return d.reshape(-1, d.shape[-1])[:, :2]


def lift_3d(cloud) -> np.ndarray:
    c = np.asarray(cloud, dtype=np.float64)
    if c.ndim != 2 or c.shape[1] not in (2, 3):
        raise InvalidInput(f"cloud must have shape (n, 2) or (n, 3), got {c.shape}")
    if c.shape[1] == 2:
        c = np.column_stack([c, np.zeros(len(c))])
    return c


def log_ratio(births: np.ndarray, deaths: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.log(deaths / np.maximum(births, LOG_EPS))
    r = np.where(np.isnan(r), 0.0, r)
    return np.clip(r, -LOG_CLAMP, LOG_CLAMP)


def top_persistence_order(diagram: np.ndarray) -> np.ndarray:
    """Indices sorted by descending persistence, then birth, then input order."""
    d = _as_diagram(diagram)
    pers = d[:, 1] - d[:, 0]
    return np.lexsort((np.arange(len(d)), d[:, 0], -pers))


def pd_point_features(diagram, n_pd: int):
    """Return ``(pd_feats, mask, source_index)`` padded/truncated to ``n_pd`` rows."""
    if n_pd < 1:
        raise InvalidInput("N_pd must be at least 1")
    d = _as_diagram(diagram)
    idx = top_persistence_order(d)[:n_pd]
    kept = d[idx]
    feats = np.zeros((n_pd, 4))
    mask = np.zeros(n_pd, dtype=bool)
    k = len(kept)
    if k:
        feats[:k, 0] = kept[:, 0]
        feats[:k, 1] = kept[:, 1]
        feats[:k, 2] = kept[:, 1] - kept[:, 0]
        feats[:k, 3] = log_ratio(kept[:, 0], kept[:, 1])
        mask[:k] = True
    source = np.full(n_pd, -1, dtype=np.int64)
    source[:k] = idx
    return feats, mask, source


def pd_statistics(diagram) -> np.ndarray:
    d = _as_diagram(diagram)
    if len(d) == 0:
        return np.zeros(5)
    pers = d[:, 1] - d[:, 0]
    return np.array([len(d), pers.mean(), pers.std(), pers.max(), d[:, 0].mean()])


def cloud_statistics(cloud) -> np.ndarray:
    """(count, mean per-axis std, mean norm, extent_x, extent_y, extent_z)."""
    c = lift_3d(cloud)
    if len(c) == 0:
        raise InvalidInput("cloud is empty")
    extents = c.max(axis=0) - c.min(axis=0)
    return np.array([
        len(c),
        c.std(axis=0).mean(),
        np.linalg.norm(c, axis=1).mean(),
        *extents,
    ])


def knn_mean_distances(points: np.ndarray, k: int, chunk: int = 256) -> np.ndarray:
    """Mean distance from each point to its ``k`` nearest other points (brute force)."""
    n = len(points)
    out = np.empty(n)
    for s in range(0, n, chunk):
        blk = points[s:s + chunk]
        diff = blk[:, None, :] - points[None, :, :]
        d = np.sqrt((diff * diff).sum(axis=-1))
        rows = np.arange(len(blk))
        d[rows, rows + s] = np.inf
        out[s:s + chunk] = np.sort(np.partition(d, k - 1, axis=1)[:, :k], axis=1).mean(axis=1)
    return out


def noise_uniformity(cloud, k: int = KNN_K) -> np.ndarray:
    """(knn_std, pca_ratio, density_cv) of a cloud."""
    c = lift_3d(cloud)
    keep, _ = unique_points(c)
    c = c[keep]
    n = len(c)
    if n < 2:
        raise InvalidInput(f"noise estimates need at least 2 distinct points, got {n}")
    k_eff = min(k, n - 1)
    dbar = knn_mean_distances(c, k_eff)
    knn_std = dbar.std()
    eig = np.linalg.eigvalsh(np.cov(c, rowvar=False, bias=True))
    pca_ratio = 0.0 if eig[-1] <= 0 else max(eig[0], 0.0) / eig[-1]
    density = 1.0 / dbar
    density_cv = density.std() / density.mean()
    return np.array([knn_std, pca_ratio, density_cv])


def aux_vector(cloud, diagram, groups: Sequence[str] = tuple(AUX_GROUPS)) -> np.ndarray:
    parts = []
    cstats = None
    for g in AUX_GROUPS:
        if g not in groups:
            continue
        if g == "pd_stats":
            parts.append(pd_statistics(diagram))
        elif g in ("pc_stats", "bbox"):
            if cstats is None:
                cstats = cloud_statistics(cloud)
            parts.append(cstats[:3] if g == "pc_stats" else cstats[3:])
        else:
            parts.append(noise_uniformity(cloud))
    unknown = set(groups) - set(AUX_GROUPS)
    if unknown:
        raise InvalidInput(f"unknown auxiliary groups {sorted(unknown)}")
    return np.concatenate(parts) if parts else np.zeros(0)


def cap_cloud(cloud: np.ndarray, n_pc: int, rng: np.random.Generator) -> np.ndarray:
    """Random subsample without replacement, or cycle shuffled copies up to ``n_pc``."""
    c = lift_3d(cloud)
    n = len(c)
    if n >= n_pc:
        return c[np.sort(rng.choice(n, n_pc, replace=False))] if n > n_pc else c.copy()
    reps = -(-n_pc // n)
    idx = np.concatenate([rng.permutation(n) for _ in range(reps)])[:n_pc]
    return c[idx]


def build_bundle(sample, n_pd: int, n_pc: int, aux_groups: Sequence[str] = tuple(AUX_GROUPS),
                 seed: int = 0) -> FeatureBundle:
    """Assemble a bundle; statistics always use the uncapped cloud and diagram.

    ``sample`` needs ``cloud`` and ``diagram`` attributes; ``labels`` is optional.
    """
    diagram = _as_diagram(sample.diagram)
    feats, mask, source = pd_point_features(diagram, n_pd)
    labels = None
    raw = getattr(sample, "labels", None)
    if raw is not None:
        raw = np.asarray(raw, dtype=bool)
        labels = np.zeros(n_pd, dtype=bool)
        labels[mask] = raw[source[mask]]
    aux = aux_vector(sample.cloud, diagram, aux_groups)
    rng = np.random.default_rng(seed)
    cloud = cap_cloud(sample.cloud, n_pc, rng)
    return FeatureBundle(feats, mask, aux, cloud, labels, source)
