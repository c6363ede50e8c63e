# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scaling kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport exp, fabs, isfinite

cnp.import_array()

cdef double MAX_EXP = 700.0
cdef double BRACKET_LIMIT = 64.0
cdef int BISECT_STEPS = 200

cdef enum:
    C_OK = 0
    C_FROZEN = 1
    C_UNCONVERGED = 2

OK = C_OK
FROZEN = C_FROZEN
UNCONVERGED = C_UNCONVERGED


def feature_moments(const cnp.int64_t[:] indptr, const cnp.int64_t[:] indices,
                    const double[:] data, const cnp.int64_t[:] row_level,
                    const double[:] probs, Py_ssize_t n_features, Py_ssize_t n_levels):
    cdef cnp.ndarray[double, ndim=2] out = np.zeros((n_features, n_levels))
    cdef double[:, ::1] m = out
    cdef Py_ssize_t r, j, n_rows = indptr.shape[0] - 1
    cdef double p
    cdef cnp.int64_t lvl
    with nogil:
        for r in range(n_rows):
            p = probs[r]
            lvl = row_level[r]
            for j in range(indptr[r], indptr[r + 1]):
                m[indices[j], lvl] += p * data[j]
    return out


cdef inline void _g(const double[:, ::1] m, const double[::1] levels, Py_ssize_t i,
                    double t, double b, double inv_var, double d,
                    double* g, double* dg) noexcept nogil:
    cdef Py_ssize_t l
    cdef double x, e, s = 0.0, ds = 0.0
    for l in range(levels.shape[0]):
        if m[i, l] != 0.0:
            x = d * levels[l]
            if x > MAX_EXP:
                x = MAX_EXP
            e = m[i, l] * exp(x)
            s += e
            ds += e * levels[l]
    g[0] = s + (b + d) * inv_var - t
    dg[0] = ds + inv_var


cdef signed char _solve_one(const double[:, ::1] m, const double[::1] levels, Py_ssize_t i,
                            double t, double b, double inv_var, double tol,
                            int max_steps, double* out) noexcept nogil:
    cdef double lo = -1.0, hi = 1.0, glo, ghi, g, dg, d, new, mid
    cdef int step
    _g(m, levels, i, t, b, inv_var, lo, &glo, &dg)
    _g(m, levels, i, t, b, inv_var, hi, &ghi, &dg)
    while (glo > 0 and lo > -BRACKET_LIMIT) or (ghi < 0 and hi < BRACKET_LIMIT):
        if glo > 0 and lo > -BRACKET_LIMIT:
            lo *= 2
        if ghi < 0 and hi < BRACKET_LIMIT:
            hi *= 2
        _g(m, levels, i, t, b, inv_var, lo, &glo, &dg)
        _g(m, levels, i, t, b, inv_var, hi, &ghi, &dg)
    if glo > 0:
        out[0] = lo
        return C_UNCONVERGED
    if ghi < 0:
        out[0] = hi
        return C_UNCONVERGED

    d = 0.0
    for step in range(max_steps):
        _g(m, levels, i, t, b, inv_var, d, &g, &dg)
        if g == 0.0:
            out[0] = d
            return C_OK
        if g < 0:
            lo = d
        else:
            hi = d
        new = d - g / dg
        if not (isfinite(new) and new > lo and new < hi):
            new = 0.5 * (lo + hi)
        if fabs(new - d) < tol or hi - lo < tol:
            out[0] = new
            return C_OK
        d = new

    for step in range(BISECT_STEPS):
        if hi - lo < tol:
            break
        mid = 0.5 * (lo + hi)
        _g(m, levels, i, t, b, inv_var, mid, &g, &dg)
        if g < 0:
            lo = mid
        else:
            hi = mid
    out[0] = 0.5 * (lo + hi)
    return C_UNCONVERGED


def solve_increments(moments, levels, target, weights, double inv_var, double tol,
                     int max_steps, double floor, int num_threads=1):
    cdef const double[:, ::1] m = np.ascontiguousarray(moments, dtype=np.float64)
    cdef const double[::1] lv = np.ascontiguousarray(levels, dtype=np.float64)
    cdef const double[::1] t = np.ascontiguousarray(target, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = t.shape[0], i
    delta_arr = np.zeros(n)
    flags_arr = np.zeros(n, dtype=np.int8)
    cdef double[::1] delta = delta_arr
    cdef signed char[::1] flags = flags_arr
    if num_threads < 1:
        num_threads = 1
    for i in prange(n, nogil=True, num_threads=num_threads, schedule="static"):
        if t[i] <= 0.0 and inv_var == 0.0:
            delta[i] = floor - b[i]
            flags[i] = C_FROZEN
        else:
            flags[i] = _solve_one(m, lv, i, t[i], b[i], inv_var, tol, max_steps, &delta[i])
    return delta_arr, flags_arr
