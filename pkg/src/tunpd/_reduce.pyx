# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled GF(2) column reduction. Mirrors ``_reduce_py.reduce_columns``."""
from libcpp.vector cimport vector
import numpy as np


cdef inline void _xor_into(vector[long long]& col, vector[long long]& other,
                           vector[long long]& tmp) noexcept nogil:
    cdef size_t a = 0, b = 0, na = col.size(), nb = other.size()
    tmp.clear()
    while a < na and b < nb:
        if col[a] < other[b]:
            tmp.push_back(col[a]); a += 1
        elif col[a] > other[b]:
            tmp.push_back(other[b]); b += 1
        else:
            a += 1; b += 1
    while a < na:
        tmp.push_back(col[a]); a += 1
    while b < nb:
        tmp.push_back(other[b]); b += 1
    col.swap(tmp)


def reduce_columns(const long long[::1] indptr, const long long[::1] indices,
                   const long long[::1] dims, bint clearing=True):
    cdef Py_ssize_t m = indptr.shape[0] - 1
    dims_np = np.asarray(dims)
    if clearing:
        top = int(dims_np.max()) if m else 0
        order_arr = np.concatenate(
            [np.nonzero(dims_np == d)[0] for d in range(top, 0, -1)] + [np.zeros(0, np.int64)]
        ).astype(np.int64)
    else:
        order_arr = np.nonzero(dims_np > 0)[0].astype(np.int64)
    cdef const long long[::1] order = order_arr
    low_arr = np.full(m, -1, dtype=np.int64)
    pivot_arr = np.full(m, -1, dtype=np.int64)
    cleared_arr = np.zeros(m, dtype=np.uint8)
    cdef long long[::1] low = low_arr
    cdef long long[::1] pivot_col = pivot_arr
    cdef unsigned char[::1] cleared = cleared_arr
    cdef vector[vector[long long]] reduced
    cdef vector[long long] col, tmp
    cdef Py_ssize_t t, j, k
    cdef long long lo, p, n_add = 0
    reduced.resize(m)
    with nogil:
        for t in range(order.shape[0]):
            j = order[t]
            if cleared[j]:
                continue
            col.clear()
            for k in range(indptr[j], indptr[j + 1]):
                col.push_back(indices[k])
            while col.size() > 0:
                p = pivot_col[col.back()]
                if p < 0:
                    break
                _xor_into(col, reduced[p], tmp)
                n_add += 1
            if col.size() > 0:
                lo = col.back()
                low[j] = lo
                pivot_col[lo] = j
                reduced[j].swap(col)
                if clearing:
                    cleared[lo] = 1
    return low_arr, int(n_add)
