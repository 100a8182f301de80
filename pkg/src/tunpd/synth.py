"""Synthetic labeled corpus with analytically known first Betti numbers.

Planar kinds use the alpha filtration; 3D kinds use the Rips filtration.
A confounder is a sparse ring placed away from the shape: its loop is born
late (so it is noise by the labeling rule) but can out-persist true loops.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .complex import alpha_filtration_2d, rips_filtration, unique_points
from .errors import GenerationFailed, InvalidInput
from .persistence import diagram as compute_diagram

log = logging.getLogger(__name__)

PLANAR_KINDS = ("circle", "ellipse", "k_circles", "annulus", "figure_eight", "filled_disk")
SPATIAL_KINDS = ("torus_3d", "sphere_3d", "circle_3d")
KINDS = PLANAR_KINDS + SPATIAL_KINDS

TAU_FACTOR = 3.0
MARGIN = 1.5
MAX_ATTEMPTS = 50


@dataclass
class LabeledSample:
    id: str
    cloud: np.ndarray  # (n, 3); planar kinds have z = 0
    diagram: np.ndarray  # (k, 2) finite dimension-1 pairs
    labels: np.ndarray  # (k,) bool
    meta: dict = field(default_factory=dict)

    @property
    def beta1(self) -> int:
        return int(self.meta["beta1"])

    def to_json(self) -> str:
        return json.dumps({
            "id": self.id,
            "meta": self.meta,
            "cloud": self.cloud.tolist(),
            "diagram": self.diagram.tolist(),
            "labels": [int(x) for x in self.labels],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LabeledSample":
        obj = json.loads(text)
        return cls(
            id=obj["id"],
            cloud=np.asarray(obj["cloud"], dtype=np.float64).reshape(-1, 3),
            diagram=np.asarray(obj["diagram"], dtype=np.float64).reshape(-1, 2),
            labels=np.asarray(obj["labels"], dtype=bool),
            meta=obj.get("meta", {}),
        )


class Reject(Exception):
    """The sample's ground truth would be ambiguous; regenerate it."""


# ---------------------------------------------------------------------------
# shapes

def _even_circle(rng, n, radius, center=(0.0, 0.0)):
    # stratified angles: uniform spacing up to a small per-point jitter
    t = (np.arange(n) + rng.uniform(0.25, 0.75, n)) * (2 * np.pi / n) + rng.uniform(0, 2 * np.pi)
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def _rotation_2d(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def _disk(rng, n, r_out, r_in=0.0):
    u = rng.uniform(r_in ** 2 / r_out ** 2, 1.0, n)
    rad = r_out * np.sqrt(u)
    t = rng.uniform(0, 2 * np.pi, n)
    return np.column_stack([rad * np.cos(t), rad * np.sin(t)])


def _random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def _torus(rng, n, big, small):
    pts = []
    while len(pts) < n:
        th = rng.uniform(0, 2 * np.pi, 2 * n)
        ph = rng.uniform(0, 2 * np.pi, 2 * n)
        ok = rng.uniform(0, 1, 2 * n) < (big + small * np.cos(ph)) / (big + small)
        for a, b in zip(th[ok], ph[ok]):
            pts.append(((big + small * np.cos(b)) * np.cos(a), (big + small * np.cos(b)) * np.sin(a),
                        small * np.sin(b)))
    return np.asarray(pts[:n])


def _fps(points: np.ndarray, n: int, rng) -> np.ndarray:
    """Greedy farthest-point subsample, for even coverage with few points."""
    chosen = [int(rng.integers(len(points)))]
    d = np.linalg.norm(points - points[chosen[0]], axis=1)
    for _ in range(n - 1):
        i = int(np.argmax(d))
        chosen.append(i)
        d = np.minimum(d, np.linalg.norm(points - points[i], axis=1))
    return points[np.sort(chosen)]


DEFAULTS = {
    "circle": {"n": (90, 180), "size": (0.6, 1.6)},
    "ellipse": {"n": (100, 180), "size": (0.8, 1.6), "aspect": (0.45, 0.9)},
    "k_circles": {"n": (50, 90), "size": (0.35, 0.7), "k": (2, 4)},
    "annulus": {"n": (220, 320), "size": (0.9, 1.5), "hole": (0.5, 0.65)},
    "figure_eight": {"n": (70, 110), "size": (0.5, 0.9)},
    "filled_disk": {"n": (150, 260), "size": (0.8, 1.5)},
    "torus_3d": {"n": (110, 130), "size": (1.0, 1.0), "tube": (0.45, 0.5)},
    "sphere_3d": {"n": (60, 90), "size": (0.8, 1.2)},
    "circle_3d": {"n": (40, 60), "size": (0.6, 1.4)},
}


def _pick(rng, params, key, kind):
    v = params.get(key, DEFAULTS[kind].get(key))
    if isinstance(v, (tuple, list)):
        lo, hi = v
        if isinstance(lo, int) and isinstance(hi, int):
            return int(rng.integers(lo, hi + 1))
        return float(rng.uniform(lo, hi))
    return v


def generate_shape(kind: str, params: dict | None = None, seed: int = 0):
    """Sample a shape. Returns ``(cloud, beta1, info)``; cloud is (n, 2) or (n, 3).

    ``params`` may override ``n``, ``size``, ``noise_sigma`` and kind-specific
    keys (``k``, ``aspect``, ``hole``, ``tube``), and may carry
    ``confounder: true`` to add a sparse, distant ring.
    """
    if kind not in KINDS:
        raise InvalidInput(f"unknown shape kind {kind!r}; expected one of {KINDS}")
    params = dict(params or {})
    sigma = float(params.get("noise_sigma", 0.0))
    if sigma < 0 or not math.isfinite(sigma):
        raise InvalidInput(f"noise_sigma must be a non-negative length, got {sigma}")
    rng = np.random.default_rng(seed)
    n = _pick(rng, params, "n", kind)
    size = _pick(rng, params, "size", kind)
    if not (isinstance(n, int) and n >= 3) or not size > 0:
        raise InvalidInput(f"invalid n={n!r} / size={size!r} for {kind}")
    info: dict = {"n_main": n, "size": size}

    if kind == "circle":
        pts, beta1 = _even_circle(rng, n, size), 1
    elif kind == "ellipse":
        aspect = _pick(rng, params, "aspect", kind)
        t = (np.arange(n) + rng.uniform(0.25, 0.75, n)) * (2 * np.pi / n)
        pts, beta1 = np.column_stack([size * np.cos(t), aspect * size * np.sin(t)]), 1
        info["aspect"] = aspect
    elif kind == "k_circles":
        k = _pick(rng, params, "k", kind)
        if k < 1:
            raise InvalidInput("k_circles needs k >= 1")
        pts, beta1 = [], k
        # centres in a row: circles arranged around a gap would enclose it and
        # add a spurious loop that dies late
        x = 0.0
        for i in range(k):
            r = size * rng.uniform(0.75, 1.0)
            if i:
                x += r + size * rng.uniform(0.6, 1.0)
            pts.append(_even_circle(rng, n, r, (x, 0.0)))
            x += r
        pts = np.concatenate(pts)
        pts -= pts.mean(axis=0)
        pts = pts @ _rotation_2d(rng.uniform(0, 2 * np.pi)).T
        info["k"] = k
    elif kind == "annulus":
        hole = _pick(rng, params, "hole", kind)
        pts, beta1 = _disk(rng, n, size, hole * size), 1
        info["hole"] = hole
    elif kind == "figure_eight":
        r = size
        a = _even_circle(rng, n, r, (-r, 0.0))
        b = _even_circle(rng, n, r, (r, 0.0))
        pts, beta1 = np.concatenate([a, b]), 2
    elif kind == "filled_disk":
        pts, beta1 = _disk(rng, n, size), 0
    elif kind == "torus_3d":
        tube = _pick(rng, params, "tube", kind)
        dense = _torus(rng, 20 * n, size, tube * size)
        pts, beta1 = _fps(dense, n, rng), 2
        info["tube"] = tube
    elif kind == "sphere_3d":
        v = rng.normal(size=(20 * n, 3))
        v = size * v / np.linalg.norm(v, axis=1, keepdims=True)
        pts, beta1 = _fps(v, n, rng), 0
    else:  # circle_3d
        c = _even_circle(rng, n, size)
        pts, beta1 = np.column_stack([c, np.zeros(n)]) @ _random_rotation(rng).T, 1

    if kind in SPATIAL_KINDS and kind != "circle_3d":
        pts = pts @ _random_rotation(rng).T
    if sigma > 0:
        pts = pts + rng.normal(scale=sigma, size=pts.shape)
    if params.get("confounder"):
        pts, conf = _add_confounder(rng, pts, rips=kind in SPATIAL_KINDS)
        info["confounder"] = conf
    return pts, beta1, info


def _add_confounder(rng, pts: np.ndarray, rips: bool = False):
    """Sparse ring beside the shape: late birth, large persistence.

    With n shape points of mean 1-NN spacing s and m ring points of half-chord
    b, the labeling threshold is 3 (n s + 2 m b) / (n + m); the ring is born
    after it iff b > 3 n s / (n - 5 m), which fixes a lower bound on the radius.
    """
    from .features import knn_mean_distances

    dim = pts.shape[1]
    n = len(pts)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    extent = float((hi - lo).max())
    m = int(rng.integers(5, max(5, min(12, n // 16)) + 1))
    s = float(knn_mean_distances(pts, 1).mean())
    half_chord = math.sin(math.pi / m)
    needed = 1.25 * TAU_FACTOR * n * s / (n - 5 * m) / half_chord
    # persistence of a regular m-gon is radius * (1 - sin(pi/m)) under alpha
    # and radius * (sin(2pi/m) - sin(pi/m)) under Rips; aim above the
    # extent-scale loops of the shape itself
    factor = (math.sin(2 * math.pi / m) if rips else 1.0) - half_chord
    radius = max(0.5 * extent * rng.uniform(1.1, 1.4) / factor, needed)
    t = np.arange(m) * (2 * np.pi / m) + rng.uniform(0, 2 * np.pi)
    ring = radius * np.column_stack([np.cos(t), np.sin(t)])
    gap = extent * rng.uniform(0.4, 0.6)
    centre = np.zeros(dim)
    centre[0] = hi[0] + gap + radius
    centre[1] = 0.5 * (lo[1] + hi[1])
    if dim == 3:
        ring = np.column_stack([ring, np.zeros(m)]) @ _random_rotation(rng).T
        centre[2] = 0.5 * (lo[2] + hi[2])
    return np.concatenate([pts, ring + centre]), {"radius": radius, "points": m}


# ---------------------------------------------------------------------------
# labeling

def mean_nn_distance(cloud: np.ndarray) -> float:
    c = np.asarray(cloud, dtype=np.float64)
    keep, _ = unique_points(c)
    c = c[keep]
    if len(c) < 2:
        return 0.0
    from .features import knn_mean_distances

    return float(knn_mean_distances(c, 1).mean())


def label_sample(cloud, diagram, beta1: int) -> np.ndarray:
    """Label the ``beta1`` most persistent early-born points; raise Reject if ambiguous."""
    d = np.asarray(diagram, dtype=np.float64).reshape(-1, 2)
    if not np.all(np.isfinite(d)):
        raise InvalidInput("label_sample needs a finite diagram")
    labels = np.zeros(len(d), dtype=bool)
    if beta1 == 0:
        return labels
    tau = TAU_FACTOR * mean_nn_distance(cloud)
    pers = d[:, 1] - d[:, 0]
    cand = np.nonzero(d[:, 0] <= tau)[0]
    if len(cand) < beta1:
        raise Reject(f"{len(cand)} early-born candidates for beta1={beta1}")
    order = cand[np.lexsort((cand, d[cand, 0], -pers[cand]))]
    chosen, rest = order[:beta1], order[beta1:]
    if len(rest) and not pers[chosen].min() > MARGIN * pers[rest].max():
        raise Reject(
            f"margin {pers[chosen].min():.4g} <= {MARGIN} x {pers[rest].max():.4g}"
        )
    labels[chosen] = True
    return labels


def sample_diagram(cloud: np.ndarray, kind: str) -> np.ndarray:
    if kind in PLANAR_KINDS:
        fc = alpha_filtration_2d(cloud[:, :2])
    else:
        fc = rips_filtration(cloud)
    return compute_diagram(fc).dim(1)


def derive_seed(seed: int, key: str) -> int:
    h = int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")
    return (int(seed) ^ h) & (2 ** 63 - 1)


def make_sample(sample_id: str, kind: str, params: dict, seed: int) -> LabeledSample:
    """Generate and label one sample, resampling on rejection."""
    last = None
    for attempt in range(MAX_ATTEMPTS):
        s = derive_seed(seed, f"{sample_id}/{attempt}")
        pts, beta1, info = generate_shape(kind, params, s)
        cloud = pts if pts.shape[1] == 3 else np.column_stack([pts, np.zeros(len(pts))])
        _, dropped = unique_points(cloud)
        dgm = sample_diagram(cloud, kind)
        try:
            labels = label_sample(cloud, dgm, beta1)
        except Reject as exc:
            last = exc
            continue
        meta = {
            "beta1": beta1,
            "shape_kind": kind,
            "noise_sigma": float(params.get("noise_sigma", 0.0)),
            "n_points": int(len(cloud)),
            "seed": s,
            "attempts": attempt + 1,
            "confounder": bool(params.get("confounder", False)),
            "duplicates_dropped": int(dropped),
        }
        return LabeledSample(sample_id, cloud, dgm, labels, meta)
    raise GenerationFailed(f"sample {sample_id} ({kind}, {params}) rejected {MAX_ATTEMPTS} times: {last}")


# ---------------------------------------------------------------------------
# corpus

DESK_SPEC = {
    "seed": 42,
    "kinds": {
        "circle": 36, "ellipse": 34, "k_circles": 36, "annulus": 34, "figure_eight": 34,
        "filled_disk": 34, "torus_3d": 16, "sphere_3d": 18, "circle_3d": 18,
    },
    "noise_levels": [0.0, 0.01, 0.02],
    "confounder_rate": 0.3,
    "split": {"train": 200, "val": 30, "test": 30},
}


def _plan(spec: dict, rng: np.random.Generator) -> list[dict]:
    kinds = spec.get("kinds")
    if not kinds:
        kinds = {k: v for k, v in spec.items() if k in KINDS}
    if not kinds or sum(kinds.values()) < 1:
        raise InvalidInput("corpus spec must request at least one sample")
    bad = set(kinds) - set(KINDS)
    if bad:
        raise InvalidInput(f"unknown kinds in spec: {sorted(bad)}")
    levels = list(spec.get("noise_levels", [0.0]))
    rate = float(spec.get("confounder_rate", 0.0))
    plan = []
    for kind in KINDS:
        for i in range(int(kinds.get(kind, 0))):
            plan.append({"kind": kind, "index": i})
    order = rng.permutation(len(plan))
    plan = [plan[i] for i in order]
    n_conf = int(round(rate * len(plan)))
    conf = set(rng.permutation(len(plan))[:n_conf].tolist())
    for j, p in enumerate(plan):
        p["noise_sigma"] = float(levels[j % len(levels)])
        p["confounder"] = j in conf
        p["id"] = f"{p['kind']}-{p['index']:04d}"
    return plan


def _splits(spec: dict, n: int) -> list[str]:
    split = spec.get("split") or {"train": 0.8, "val": 0.1, "test": 0.1}
    counts = {k: split.get(k, 0) for k in ("train", "val", "test")}
    if all(isinstance(v, float) and v <= 1 for v in counts.values()):
        counts = {k: int(round(v * n)) for k, v in counts.items()}
    total = sum(counts.values())
    counts["train"] += n - total
    if counts["train"] < 0:
        raise InvalidInput(f"split {split} exceeds {n} samples")
    return ["train"] * counts["train"] + ["val"] * counts["val"] + ["test"] * counts["test"]


def generate_corpus(spec: dict, out_dir, seed: int | None = None) -> dict:
    """Write ``corpus.jsonl`` and ``manifest.json`` into ``out_dir``; return the manifest."""
    seed = int(spec.get("seed", 0) if seed is None else seed)
    rng = np.random.default_rng(seed)
    plan = _plan(spec, rng)
    splits = _splits(spec, len(plan))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    with open(out / "corpus.jsonl", "w") as fh:
        for p, split in zip(plan, splits):
            params = dict(spec.get("params", {}).get(p["kind"], {}))
            params.update(noise_sigma=p["noise_sigma"], confounder=p["confounder"])
            try:
                s = make_sample(p["id"], p["kind"], params, seed)
            except GenerationFailed as exc:
                raise GenerationFailed(f"{exc} [spec entry: {p}]") from None
            s.meta["split"] = split
            fh.write(s.to_json() + "\n")
            entries.append({
                "id": s.id, "split": split, "kind": p["kind"], "beta1": s.beta1,
                "seed": s.meta["seed"], "noise_sigma": p["noise_sigma"],
                "confounder": p["confounder"], "attempts": s.meta["attempts"],
                "n_points": s.meta["n_points"], "n_diagram": int(len(s.diagram)),
            })
            log.debug("generated %s (%d attempts)", s.id, s.meta["attempts"])
    n_att = sum(e["attempts"] for e in entries)
    manifest = {
        "seed": seed,
        "spec": spec,
        "n_samples": len(entries),
        "split_counts": {k: splits.count(k) for k in ("train", "val", "test")},
        "confounder_count": sum(e["confounder"] for e in entries),
        "rejections": n_att - len(entries),
        "rejection_rate": (n_att - len(entries)) / n_att if n_att else 0.0,
        "samples": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def load_corpus(path, split: str | None = None) -> list[LabeledSample]:
    p = Path(path)
    if p.is_dir():
        p = p / "corpus.jsonl"
    samples = []
    with open(p) as fh:
        for line in fh:
            if line.strip():
                s = LabeledSample.from_json(line)
                if split is None or s.meta.get("split") == split:
                    samples.append(s)
    return samples


def iter_kinds(samples: Iterable[LabeledSample], kind: str):
    return (s for s in samples if s.meta.get("shape_kind") == kind)
