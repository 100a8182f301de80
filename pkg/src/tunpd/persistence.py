"""Persistence diagrams by boundary-matrix reduction over GF(2)."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernel
from .complex import FilteredComplex
from .errors import InconsistentComplex, InvalidInput, OracleTooLarge

ORACLE_MAX_SIMPLICES = 200
ZERO_PERSISTENCE_RTOL = 1e-12


@dataclass
class BoundaryMatrix:
    """Sparse mod-2 boundary matrix in filtration order (CSC layout).

    Column ``j`` holds ``indices[indptr[j]:indptr[j+1]]``, the sorted
    filtration positions of the facets of the j-th simplex.
    """

    indptr: np.ndarray
    indices: np.ndarray
    dims: np.ndarray
    values: np.ndarray
    vertices: np.ndarray

    def __len__(self) -> int:
        return len(self.dims)

    def column(self, j: int) -> np.ndarray:
        return self.indices[self.indptr[j]:self.indptr[j + 1]]


@dataclass
class PersistenceDiagram:
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    essential: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.essential = np.asarray(self.essential, dtype=np.float64).reshape(-1, 2)

    def dim(self, d: int) -> np.ndarray:
        """Finite (birth, death) pairs of dimension ``d``."""
        return self.points[self.points[:, 2] == d, :2]

    def essential_births(self, d: int) -> np.ndarray:
        return self.essential[self.essential[:, 1] == d, 0]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["birth", "death", "dim"])
        for b, d, k in self.points:
            w.writerow([repr(float(b)), repr(float(d)), int(k)])
        for b, k in self.essential:
            w.writerow([repr(float(b)), "inf", int(k)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "PersistenceDiagram":
        text = source if "\n" in str(source) else Path(source).read_text()
        rows = list(csv.DictReader(io.StringIO(text)))
        pts, ess = [], []
        for r in rows:
            try:
                b, d = float(r["birth"]), float(r["death"])
                k = int(r.get("dim") or 1)
            except (KeyError, ValueError) as exc:
                raise InvalidInput(f"bad diagram row {r}: {exc}") from None
            if math.isinf(d):
                ess.append((b, k))
            else:
                pts.append((b, d, k))
        return cls(np.array(pts), np.array(ess))


def _simplex_keys(rows: np.ndarray, base: int) -> np.ndarray:
    r = rows + 1
    return (r[:, 0] * base + r[:, 1]) * base + r[:, 2]


def boundary_matrix(fc: FilteredComplex) -> BoundaryMatrix:
    verts, values, dims = fc.sorted_arrays()
    m = len(verts)
    base = int(verts.max()) + 2 if m else 2
    keys = _simplex_keys(verts, base)
    sorter = np.argsort(keys, kind="stable")
    sorted_keys = keys[sorter]

    faces = []
    owners = []
    for d, drop_sets in ((1, ((1,), (0,))), (2, ((1, 2), (0, 2), (0, 1)))):
        sel = np.nonzero(dims == d)[0]
        if len(sel) == 0:
            continue
        for keep in drop_sets:
            f = np.full((len(sel), 3), -1, dtype=np.int64)
            f[:, :len(keep)] = verts[sel][:, keep]
            faces.append(f)
            owners.append(sel)
    if faces:
        face_rows = np.concatenate(faces)
        owner = np.concatenate(owners)
        fk = _simplex_keys(face_rows, base)
        loc = np.searchsorted(sorted_keys, fk)
        loc = np.minimum(loc, m - 1)
        found = sorted_keys[loc] == fk
        if not np.all(found):
            bad = int(np.nonzero(~found)[0][0])
            raise InconsistentComplex(
                f"face {tuple(face_rows[bad][face_rows[bad] >= 0])} of simplex "
                f"{tuple(verts[owner[bad]][verts[owner[bad]] >= 0])} is missing"
            )
        pos = sorter[loc]
        if np.any(pos >= owner):
            bad = int(np.nonzero(pos >= owner)[0][0])
            raise InconsistentComplex(f"face at position {pos[bad]} follows its coface {owner[bad]}")
        o = np.lexsort((pos, owner))
        owner, pos = owner[o], pos[o]
    else:
        owner = pos = np.zeros(0, dtype=np.int64)
    counts = np.bincount(owner, minlength=m)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return BoundaryMatrix(indptr, pos.astype(np.int64), dims.astype(np.int64), values, verts)


def pairing(bm: BoundaryMatrix, clearing: bool = True, backend: str | None = None):
    """Raw index pairing: ``(pairs, essential_positions)`` in filtration order."""
    fn = _kernel.reduce_columns
    if backend == "python":
        fn = _kernel.python_reduce_columns
    low, _ = fn(np.ascontiguousarray(bm.indptr), np.ascontiguousarray(bm.indices),
                np.ascontiguousarray(bm.dims), clearing)
    cols = np.nonzero(low >= 0)[0]
    pairs = np.column_stack([low[cols], cols]) if len(cols) else np.zeros((0, 2), dtype=np.int64)
    paired = np.zeros(len(bm), dtype=bool)
    paired[pairs.ravel()] = True
    essential = np.nonzero(~paired)[0]
    return pairs, essential


def reduce(bm: BoundaryMatrix, clearing: bool = True, backend: str | None = None) -> PersistenceDiagram:
    """Standard reduction; zero-persistence pairs are dropped."""
    pairs, essential = pairing(bm, clearing, backend)
    births = bm.values[pairs[:, 0]]
    deaths = bm.values[pairs[:, 1]]
    # cocircular inputs give equal values that differ by an ulp or two
    tol = ZERO_PERSISTENCE_RTOL * (float(np.abs(bm.values).max()) if len(bm) else 0.0)
    keep = deaths - births > tol
    pts = np.column_stack([births[keep], deaths[keep], bm.dims[pairs[keep, 0]]])
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0], pts[:, 2]))] if len(pts) else pts
    # dimension-2 classes are artifacts of the 2-skeleton cap
    essential = essential[bm.dims[essential] <= 1]
    ess = np.column_stack([bm.values[essential], bm.dims[essential]])
    if np.any(ess[:, 1] == 1):
        warnings.warn(
            f"{int((ess[:, 1] == 1).sum())} essential loop(s) never die; "
            "filtration cap too small?",
            RuntimeWarning,
        )
    return PersistenceDiagram(pts, ess)


def diagram(fc: FilteredComplex, clearing: bool = True) -> PersistenceDiagram:
    return reduce(boundary_matrix(fc), clearing)


def h1_diagram(fc: FilteredComplex) -> np.ndarray:
    return diagram(fc).dim(1)


# ---------------------------------------------------------------------------
# brute-force oracle

def _gf2_rank(rows: list[int]) -> int:
    pivots: dict[int, int] = {}
    rank = 0
    for r in rows:
        while r:
            top = r.bit_length() - 1
            if top in pivots:
                r ^= pivots[top]
            else:
                pivots[top] = r
                rank += 1
                break
    return rank


def _gf2_kernel(vectors: list[int]) -> list[int]:
    """Kernel basis of the map sending basis element k to ``vectors[k]``."""
    pivots: dict[int, tuple[int, int]] = {}
    kernel = []
    for k, v in enumerate(vectors):
        combo = 1 << k
        while v:
            top = v.bit_length() - 1
            if top not in pivots:
                pivots[top] = (v, combo)
                break
            pv, pc = pivots[top]
            v ^= pv
            combo ^= pc
        if not v:
            kernel.append(combo)
    return kernel


def betti_bruteforce(fc: FilteredComplex, i: int, j: int, dim: int = 1) -> int:
    """Rank of the persistent homology group ``H_dim^{i,j}`` by linear algebra.

    ``i`` and ``j`` are prefix lengths of the filtration order. Computes
    dim Z(K_i) - dim(Z(K_i) & B(K_j)) as rank[Z_i; B_j] - rank B_j. Only
    meant as a test oracle.
    """
    m = len(fc)
    if m > ORACLE_MAX_SIMPLICES:
        raise OracleTooLarge(f"{m} simplices exceeds the oracle cap of {ORACLE_MAX_SIMPLICES}")
    if not 0 <= i <= j <= m:
        raise InvalidInput(f"need 0 <= i <= j <= {m}, got i={i}, j={j}")
    verts, _, dims = fc.sorted_arrays()
    pos = {tuple(int(x) for x in verts[t]): t for t in range(m)}

    def facets(t):
        row = [int(x) for x in verts[t] if x >= 0]
        out = 0
        for drop in range(len(row)):
            f = row[:drop] + row[drop + 1:]
            out |= 1 << pos[tuple(f) + (-1,) * (3 - len(f))]
        return out

    # chains of dimension `dim` are encoded over filtration positions
    cells_i = [t for t in range(i) if dims[t] == dim]
    cycles = [
        sum(1 << cells_i[k] for k in range(len(cells_i)) if (c >> k) & 1)
        for c in _gf2_kernel([facets(t) if dim > 0 else 0 for t in cells_i])
    ]
    bounds = [facets(t) for t in range(j) if dims[t] == dim + 1]
    return _gf2_rank(cycles + bounds) - _gf2_rank(bounds)
