"""Filtered simplicial complexes built from point clouds.

Two families are provided, both in the radius convention so that their
birth/death scales are commensurate:

* the 2D alpha filtration over the Delaunay complex (triangle value is the
  circumradius, Gabriel edges enter at half their length);
* the Vietoris-Rips filtration capped at the 2-skeleton (edge value is half
  the pairwise distance, triangles enter with their longest edge).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInput, InvalidInput

AUTO = "auto"
PREDICATE_EPS = 1e-12


@dataclass(frozen=True)
class Simplex:
    vertices: tuple[int, ...]

    def __post_init__(self):
        v = self.vertices
        if not 1 <= len(v) <= 3:
            raise InvalidInput(f"simplex must have 1..3 vertices, got {v}")
        if any(a >= b for a, b in zip(v, v[1:])):
            raise InvalidInput(f"simplex vertices must be strictly increasing: {v}")

    @property
    def dimension(self) -> int:
        return len(self.vertices) - 1

    def faces(self) -> list["Simplex"]:
        v = self.vertices
        if len(v) == 1:
            return []
        return [Simplex(v[:i] + v[i + 1:]) for i in range(len(v))]


class FilteredComplex:
    """Simplices (at most triangles) with filtration values.

    Vertices are stored as an ``(m, 3)`` integer array padded with ``-1`` so
    that large Rips complexes never materialise per-simplex Python objects.
    ``order`` sorts by (value, dimension, lexicographic vertices).
    """

    def __init__(self, vertices: np.ndarray, values: np.ndarray):
        vertices = np.asarray(vertices, dtype=np.int64).reshape(-1, 3)
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if len(vertices) != len(values):
            raise InvalidInput("one filtration value per simplex required")
        self.vertices = vertices
        self.values = values
        self.dims = (vertices >= 0).sum(axis=1) - 1
        self.order = np.lexsort(
            (vertices[:, 2], vertices[:, 1], vertices[:, 0], self.dims, values)
        )

    @classmethod
    def from_simplices(cls, simplices: Iterable, values: Sequence[float]) -> "FilteredComplex":
        rows = []
        for s in simplices:
            v = s.vertices if isinstance(s, Simplex) else tuple(s)
            rows.append(tuple(v) + (-1,) * (3 - len(v)))
        return cls(np.array(rows, dtype=np.int64).reshape(-1, 3), np.asarray(values, dtype=float))

    def __len__(self) -> int:
        return len(self.values)

    def simplex(self, i: int) -> Simplex:
        row = self.vertices[i]
        return Simplex(tuple(int(x) for x in row[row >= 0]))

    @property
    def simplices(self) -> list[Simplex]:
        return [self.simplex(i) for i in range(len(self))]

    def sorted_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vertices, values and dims in filtration order."""
        o = self.order
        return self.vertices[o], self.values[o], self.dims[o]

    def count(self, dim: int) -> int:
        return int((self.dims == dim).sum())

    def value_multiset(self) -> np.ndarray:
        return np.sort(self.values)

    def __repr__(self) -> str:
        counts = [self.count(d) for d in range(3)]
        return f"FilteredComplex(vertices={counts[0]}, edges={counts[1]}, triangles={counts[2]})"


# ---------------------------------------------------------------------------
# input handling

def _as_points(points, dim: int | None = None) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or (dim is not None and pts.shape[1] != dim):
        want = f"(n, {dim})" if dim else "(n, d)"
        raise InvalidInput(f"expected a point array of shape {want}, got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InvalidInput("point coordinates must be finite")
    return pts


def unique_points(points: np.ndarray) -> tuple[np.ndarray, int]:
    """Indices of first occurrences (in input order) and the number dropped."""
    _, first = np.unique(points, axis=0, return_index=True)
    first = np.sort(first)
    return first, len(points) - len(first)


def _normalize(pts: np.ndarray) -> tuple[np.ndarray, float]:
    lo = pts.min(axis=0)
    scale = float((pts.max(axis=0) - lo).max())
    if scale == 0.0:
        scale = 1.0
    return (pts - lo) / scale, scale


# ---------------------------------------------------------------------------
# predicates on normalised coordinates

def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _incircle_det(a, b, c, d) -> float:
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    return (adx * (bdy * cd - bd * cdy)
            - ady * (bdx * cd - bd * cdx)
            + ad * (bdx * cdy - bdy * cdx))


def in_circle(pts: np.ndarray, a: int, b: int, c: int, d: int) -> bool:
    """True if ``d`` is strictly inside the circumcircle of CCW triangle abc.

    Exact ties are broken by symbolic perturbation: every lifted height
    ``|p_i|^2`` is raised by an infinitesimal that dominates for smaller
    vertex indices, which amounts to a consistent regular triangulation.
    """
    det = _incircle_det(pts[a], pts[b], pts[c], pts[d])
    if det > PREDICATE_EPS:
        return True
    if det < -PREDICATE_EPS:
        return False
    # det == det4 of rows [x, y, h, 1]; d(det4)/dh_i is the (i, 2) cofactor
    # (-1)^i * orient(others).
    rows = (a, b, c, d)
    for i in sorted(range(4), key=lambda r: rows[r]):
        others = [pts[rows[r]] for r in range(4) if r != i]
        minor = _orient(*others)
        if abs(minor) > PREDICATE_EPS:
            cof = minor if i % 2 == 0 else -minor
            return cof > 0
    return False


# ---------------------------------------------------------------------------
# Delaunay

def _sweep_triangulation(pts: np.ndarray) -> list[list[int]]:
    idx = sorted(range(len(pts)), key=lambda i: (pts[i, 0], pts[i, 1]))
    k = 2
    while k < len(idx) and abs(_orient(pts[idx[0]], pts[idx[1]], pts[idx[k]])) <= PREDICATE_EPS:
        k += 1
    if k == len(idx):
        raise DegenerateInput("all points are collinear")
    chain, apex = idx[:k], idx[k]
    tris: list[list[int]] = []
    if _orient(pts[chain[0]], pts[chain[1]], pts[apex]) > 0:
        for u, v in zip(chain, chain[1:]):
            tris.append([u, v, apex])
        hull = chain + [apex]
    else:
        for u, v in zip(chain, chain[1:]):
            tris.append([v, u, apex])
        hull = [chain[0], apex] + chain[:0:-1]
    for p in idx[k + 1:]:
        h = len(hull)
        visible = [_orient(pts[hull[i]], pts[hull[(i + 1) % h]], pts[p]) < -PREDICATE_EPS
                   for i in range(h)]
        # rotate so the visible chain does not wrap around
        start = next(i for i in range(h) if visible[i] and not visible[i - 1])
        hull = hull[start:] + hull[:start]
        visible = visible[start:] + visible[:start]
        n_vis = 0
        while n_vis < h and visible[n_vis]:
            tris.append([hull[n_vis + 1], hull[n_vis], p])
            n_vis += 1
        hull = [hull[0], p] + hull[n_vis:]
    return tris


def _lawson_flip(pts: np.ndarray, tris: list[list[int]]) -> list[list[int]]:
    edge_tris: dict[tuple[int, int], list[int]] = {}

    def key(u, v):
        return (u, v) if u < v else (v, u)

    def register(t):
        a, b, c = tris[t]
        for u, v in ((a, b), (b, c), (c, a)):
            edge_tris.setdefault(key(u, v), []).append(t)

    def unregister(t):
        a, b, c = tris[t]
        for u, v in ((a, b), (b, c), (c, a)):
            edge_tris[key(u, v)].remove(t)

    for t in range(len(tris)):
        register(t)
    stack = sorted(edge_tris)
    budget = 50 * len(pts) * len(pts) + 1000
    while stack:
        e = stack.pop()
        ts = edge_tris.get(e, [])
        if len(ts) != 2:
            continue
        t1, t2 = ts
        u, v = e
        a = tris[t1]
        # rotate t1 so that it reads (u', v', w1) with u'->v' the shared edge
        while {a[0], a[1]} != {u, v}:
            a = a[1:] + a[:1]
        uu, vv, w1 = a
        w2 = next(x for x in tris[t2] if x != u and x != v)
        if not in_circle(pts, uu, vv, w1, w2):
            continue
        budget -= 1
        if budget < 0:
            raise DegenerateInput("Delaunay flip cascade did not terminate")
        unregister(t1)
        unregister(t2)
        tris[t1] = [uu, w2, w1]
        tris[t2] = [w2, vv, w1]
        register(t1)
        register(t2)
        for x, y in ((uu, w2), (w2, vv), (vv, w1), (w1, uu)):
            stack.append(key(x, y))
    return tris


def _canonical_triangles(tris) -> np.ndarray:
    out = np.sort(np.asarray(tris, dtype=np.int64).reshape(-1, 3), axis=1)
    return out[np.lexsort((out[:, 2], out[:, 1], out[:, 0]))]


def delaunay_2d(points) -> np.ndarray:
    """Delaunay triangles as a sorted ``(t, 3)`` array of vertex indices.

    Duplicate points are ignored (the first occurrence is kept).
    """
    pts = _as_points(points, 2)
    keep, _ = unique_points(pts)
    if len(keep) < 3:
        raise DegenerateInput(f"need at least 3 distinct points, got {len(keep)}")
    norm, _ = _normalize(pts[keep])
    tris = _lawson_flip(norm, _sweep_triangulation(norm))
    return _canonical_triangles(keep[np.asarray(tris)])


# ---------------------------------------------------------------------------
# alpha filtration

def _circumradius(a, b, c) -> float:
    la = math.dist(b, c)
    lb = math.dist(a, c)
    lc = math.dist(a, b)
    area2 = abs(_orient(a, b, c))
    return la * lb * lc / (2.0 * area2)


def alpha_filtration_2d(points) -> FilteredComplex:
    """Alpha filtration of a planar cloud, values in radius units."""
    pts = _as_points(points, 2)
    keep, _ = unique_points(pts)
    if len(keep) == 0:
        raise DegenerateInput("empty point cloud")
    if len(keep) == 1:
        return FilteredComplex(np.array([[keep[0], -1, -1]]), np.zeros(1))
    norm, scale = _normalize(pts[keep])
    if len(keep) == 2:
        u, v = sorted(int(x) for x in keep)
        verts = np.array([[u, -1, -1], [v, -1, -1], [u, v, -1]])
        return FilteredComplex(verts, [0.0, 0.0, 0.5 * math.dist(pts[u], pts[v])])
    try:
        local = _lawson_flip(norm, _sweep_triangulation(norm))
    except DegenerateInput:
        return _collinear_alpha(pts, keep, norm, scale)

    tri_value = {}
    edge_opp: dict[tuple[int, int], list[tuple[int, float]]] = {}
    for a, b, c in local:
        r = _circumradius(norm[a], norm[b], norm[c]) * scale
        t = tuple(sorted((a, b, c)))
        tri_value[t] = r
        for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
            edge_opp.setdefault((min(u, v), max(u, v)), []).append((w, r))

    rows, vals = [], []
    for i in range(len(keep)):
        rows.append((keep[i], -1, -1))
        vals.append(0.0)
    for (u, v), opps in edge_opp.items():
        pu, pv = norm[u], norm[v]
        attached = any(
            (norm[w][0] - pu[0]) * (norm[w][0] - pv[0]) + (norm[w][1] - pu[1]) * (norm[w][1] - pv[1])
            < -PREDICATE_EPS
            for w, _ in opps
        )
        # the clamp only matters for rounding on Gabriel-boundary edges
        val = min(r for _, r in opps)
        if not attached:
            val = min(val, 0.5 * math.dist(pu, pv) * scale)
        a, b = sorted((int(keep[u]), int(keep[v])))
        rows.append((a, b, -1))
        vals.append(val)
    for t, r in tri_value.items():
        rows.append(tuple(sorted(int(keep[x]) for x in t)))
        vals.append(r)
    return FilteredComplex(np.array(rows, dtype=np.int64), np.array(vals))


def _collinear_alpha(pts, keep, norm, scale) -> FilteredComplex:
    # Delaunay complex of collinear sites is the path along the line.
    direction = norm[-1] - norm[0]
    t = norm @ direction
    path = np.argsort(t, kind="stable")
    rows = [(int(k), -1, -1) for k in keep]
    vals = [0.0] * len(keep)
    for u, v in zip(path, path[1:]):
        a, b = sorted((int(keep[u]), int(keep[v])))
        rows.append((a, b, -1))
        vals.append(0.5 * math.dist(norm[u], norm[v]) * scale)
    warnings.warn("collinear input: alpha complex reduces to a path", RuntimeWarning)
    return FilteredComplex(np.array(rows, dtype=np.int64), np.array(vals))


# ---------------------------------------------------------------------------
# Vietoris-Rips

def pairwise_distances(pts: np.ndarray) -> np.ndarray:
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def rips_filtration(points, r_max=AUTO) -> FilteredComplex:
    """Rips filtration up to triangles, edge value = distance / 2.

    ``r_max=AUTO`` uses half the diameter, so every edge and triangle is
    present at the end and no loop survives.
    """
    pts = _as_points(points)
    if len(pts) == 0:
        raise InvalidInput("rips_filtration needs at least one point")
    n = len(pts)
    dist = pairwise_distances(pts) * 0.5
    if isinstance(r_max, str):
        if r_max.lower() != AUTO:
            raise InvalidInput(f"r_max must be a length or {AUTO!r}")
        r_max = float(dist.max())
    r_max = float(r_max)
    if not math.isfinite(r_max) or r_max < 0:
        raise InvalidInput(f"r_max must be a non-negative finite length, got {r_max}")

    adj = dist <= r_max
    np.fill_diagonal(adj, False)
    iu, ju = np.nonzero(np.triu(adj, k=1))
    vert_rows = np.column_stack([np.arange(n), np.full(n, -1), np.full(n, -1)])
    edge_rows = np.column_stack([iu, ju, np.full(len(iu), -1)])
    edge_vals = dist[iu, ju]

    tri_chunks = []
    upper = np.triu(adj, k=1)
    for i, j in zip(iu, ju):
        ks = np.nonzero(upper[i, j + 1:] & upper[j, j + 1:])[0] + j + 1
        if len(ks):
            tri_chunks.append(np.column_stack([np.full(len(ks), i), np.full(len(ks), j), ks]))
    if tri_chunks:
        tris = np.concatenate(tri_chunks)
        tv = np.maximum(np.maximum(dist[tris[:, 0], tris[:, 1]], dist[tris[:, 0], tris[:, 2]]),
                        dist[tris[:, 1], tris[:, 2]])
    else:
        tris = np.zeros((0, 3), dtype=np.int64)
        tv = np.zeros(0)
    verts = np.concatenate([vert_rows, edge_rows, tris]).astype(np.int64)
    vals = np.concatenate([np.zeros(n), edge_vals, tv])
    return FilteredComplex(verts, vals)


# ---------------------------------------------------------------------------
# validation

@dataclass
class FiltrationReport:
    ok: bool
    message: str = ""
    simplex: int | None = None
    face: int | None = None

    def __bool__(self) -> bool:
        return self.ok


def validate_filtration(fc: FilteredComplex) -> FiltrationReport:
    """Check vertex ordering, face presence/monotonicity and the sort order.

    Reports the first violation found (indices refer to ``fc`` storage order).
    """
    n = len(fc)
    if n == 0:
        return FiltrationReport(True)
    verts = fc.vertices
    for i in range(n):
        row = verts[i][verts[i] >= 0]
        if np.any(np.diff(row) <= 0) or np.any(verts[i][len(row):] != -1):
            return FiltrationReport(False, f"simplex {i} has malformed vertices {tuple(verts[i])}", i)
    index = {tuple(int(x) for x in verts[i]): i for i in range(n)}
    if len(index) != n:
        return FiltrationReport(False, "duplicate simplices")
    position = np.empty(n, dtype=np.int64)
    position[fc.order] = np.arange(n)
    for i in range(n):
        s = fc.simplex(i)
        for f in s.faces():
            key = f.vertices + (-1,) * (3 - len(f.vertices))
            j = index.get(key)
            if j is None:
                return FiltrationReport(False, f"face {f.vertices} of simplex {i} is missing", i)
            if fc.values[j] > fc.values[i]:
                return FiltrationReport(
                    False,
                    f"simplex {i} {s.vertices} has value {fc.values[i]!r} below its face {j} "
                    f"{f.vertices} at {fc.values[j]!r}",
                    i, j,
                )
            if position[j] > position[i]:
                return FiltrationReport(False, f"face {j} ordered after coface {i}", i, j)
    return FiltrationReport(True)
