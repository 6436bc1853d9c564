# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: power iteration, window statistics, path sampling.

Kept in lockstep with shiftpress._kernels._fallback; the test suite checks
parity between the two backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

BACKEND = "native"


def power_iteration(mat, double tol=1e-12, long max_iter=1_000_000, shift=None, v0=None):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] m_arr = np.ascontiguousarray(mat, dtype=np.float64)
    cdef Py_ssize_t n = m_arr.shape[0]
    cdef double sh
    if shift is None:
        sh = 0.5 * float(np.asarray(mat).sum(axis=1).max())
    else:
        sh = float(shift)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v_arr
    if v0 is not None and len(v0) == n and np.all(np.asarray(v0) >= 0) and np.sum(v0) > 0:
        v_arr = np.asarray(v0, dtype=np.float64) / float(np.sum(v0))
    else:
        v_arr = np.full(n, 1.0 / n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_arr = np.empty(n)
    cdef const double[:, :] M = m_arr
    cdef double[:] v = v_arr
    cdef double[:] w = w_arr
    cdef double top, lam, res, acc, num, den, diff
    cdef Py_ssize_t i, j
    cdef long it
    lam = 0.0
    res = 0.0
    for it in range(1, max_iter + 1):
        top = 0.0
        for i in range(n):
            acc = sh * v[i]
            for j in range(n):
                acc += M[i, j] * v[j]
            w[i] = acc
            if acc > top:
                top = acc
        if top <= 0.0:
            raise ZeroDivisionError("matrix has a zero row on the support reached")
        for i in range(n):
            w[i] /= top
        if it % 8 == 0 or it == max_iter:
            num = 0.0
            den = 0.0
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += M[i, j] * w[j]
                v[i] = acc             # stash M w in v
                num += w[i] * acc
                den += w[i] * w[i]
            lam = num / den
            res = 0.0
            for i in range(n):
                diff = fabs(v[i] - lam * w[i])
                if diff > res:
                    res = diff
            res /= lam if lam > 1.0 else 1.0
            if res <= tol:
                return lam, w_arr / w_arr.sum(), res, it
        for i in range(n):
            v[i] = w[i]
    return lam, v_arr / v_arr.sum(), res, max_iter


def count_blocks(symbols, long m, long depth, long n):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sym = np.ascontiguousarray(symbols, dtype=np.int64)
    cdef long size = m ** depth
    cdef long mod = m ** (depth - 1)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(size, dtype=np.int64)
    cdef const long[:] s = sym
    cdef long[:] c = counts
    cdef long code = 0
    cdef long i
    for i in range(depth):
        code = code * m + s[i]
    c[code] += 1
    for i in range(1, n):
        code = (code % mod) * m + s[i + depth - 1]
        c[code] += 1
    return counts


def birkhoff_sums(symbols, table, long m, long depth, positions):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sym = np.ascontiguousarray(symbols, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tab = np.ascontiguousarray(table, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] pos = np.ascontiguousarray(positions, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(pos.shape[0], dtype=np.float64)
    cdef const long[:] s = sym
    cdef const double[:] t = tab
    cdef const long[:] p = pos
    cdef double[:] o = out
    cdef long mod = m ** (depth - 1)
    cdef double acc = 0.0
    cdef long code = 0
    cdef long i, k = 0
    cdef long n_pos = pos.shape[0]
    cdef long n_max = p[n_pos - 1] if n_pos > 0 else 0
    while k < n_pos and p[k] == 0:
        o[k] = 0.0
        k += 1
    if n_max == 0:
        return out
    for i in range(depth):
        code = code * m + s[i]
    acc = t[code]
    while k < n_pos and p[k] == 1:
        o[k] = acc
        k += 1
    for i in range(1, n_max):
        code = (code % mod) * m + s[i + depth - 1]
        acc += t[code]
        while k < n_pos and p[k] == i + 1:
            o[k] = acc
            k += 1
    return out


def sample_path(row_cumsum, long start, long length, uniforms):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] rows = np.ascontiguousarray(row_cumsum, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u_arr = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(length, dtype=np.int64)
    cdef const double[:, :] r = rows
    cdef const double[:] u = u_arr
    cdef long[:] o = out
    cdef long n_states = rows.shape[1]
    cdef long state = start
    cdef long t, lo, hi, mid
    for t in range(length):
        lo = 0
        hi = n_states
        while lo < hi:
            mid = (lo + hi) >> 1
            if r[state, mid] <= u[t]:
                lo = mid + 1
            else:
                hi = mid
        state = lo if lo < n_states else n_states - 1
        o[t] = state
    return out
