"""Pure-Python GF(2) column reduction, the fallback for ``_reduce``."""
import numpy as np


def _xor_sorted(a: list, b: list) -> list:
    out = []
    i = j = 0
    na, nb = len(a), len(b)
    while i < na and j < nb:
        x, y = a[i], b[j]
        if x < y:
            out.append(x)
            i += 1
        elif x > y:
            out.append(y)
            j += 1
        else:
            i += 1
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return out


def reduce_columns(indptr, indices, dims, clearing=True):
    """Return ``(low, n_additions)``; ``low[j]`` is the pivot row of column j or -1.

    With ``clearing`` the columns are processed one dimension at a time from
    the top, and every pivot row found is known to reduce to zero and skipped.
    """
    indptr = np.asarray(indptr).tolist()
    indices = np.asarray(indices).tolist()
    dims = np.asarray(dims).tolist()
    m = len(indptr) - 1
    low = [-1] * m
    pivot_col = [-1] * m
    cleared = [False] * m
    reduced: dict[int, list] = {}
    n_add = 0
    if clearing:
        passes = [[j for j in range(m) if dims[j] == d] for d in range(max(dims, default=0), 0, -1)]
    else:
        passes = [range(m)]
    for cols in passes:
        for j in cols:
            if cleared[j] or dims[j] == 0:
                continue
            col = indices[indptr[j]:indptr[j + 1]]
            while col:
                p = pivot_col[col[-1]]
                if p < 0:
                    break
                col = _xor_sorted(col, reduced[p])
                n_add += 1
            if col:
                lo = col[-1]
                low[j] = lo
                pivot_col[lo] = j
                reduced[j] = col
                if clearing:
                    cleared[lo] = True
    return np.array(low, dtype=np.int64), n_add
