# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled float kernels; semantics match ``edr._pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef void _fill(const double* ext, const double* w, double budget, int m,
                int* idx, double* key, double* out) nogil:
    cdef int k = 0, x, a, b, tmpi
    cdef double tmpd, W = 0.0, E = 0.0, level = 0.0, s
    for x in range(m):
        out[x] = 0.0
        if w[x] > 0:
            idx[k] = x
            key[k] = ext[x] / w[x]
            k += 1
    if k == 0:
        return
    # insertion sort by (breakpoint, index)
    for a in range(1, k):
        tmpd = key[a]
        tmpi = idx[a]
        b = a - 1
        while b >= 0 and (key[b] > tmpd or (key[b] == tmpd and idx[b] > tmpi)):
            key[b + 1] = key[b]
            idx[b + 1] = idx[b]
            b -= 1
        key[b + 1] = tmpd
        idx[b + 1] = tmpi
    for a in range(k):
        x = idx[a]
        W += w[x]
        E += ext[x]
        level = (budget + E) / W
        if a + 1 == k:
            break
        if level <= key[a + 1]:
            break
    for a in range(k):
        x = idx[a]
        s = level * w[x] - ext[x]
        if s > 0:
            out[x] = s


def water_fill(double[::1] external, double[::1] weights, double budget):
    cdef int m = weights.shape[0]
    out = np.zeros(m)
    cdef double[::1] o = out
    cdef int* idx = <int*> malloc(m * sizeof(int))
    cdef double* key = <double*> malloc(m * sizeof(double))
    _fill(&external[0], &weights[0], budget, m, idx, key, &o[0])
    free(idx)
    free(key)
    return out


cdef double _displacements(double[:, ::1] v, double[::1] c, double[:, ::1] rows,
                           double* total, double* ext, double* br, int* idx, double* key,
                           double* out) nogil:
    cdef int n = rows.shape[0], m = rows.shape[1], i, x
    cdef double shift, best = 0.0
    for x in range(m):
        total[x] = 0.0
    for i in range(n):
        for x in range(m):
            total[x] += rows[i, x]
    for i in range(n):
        for x in range(m):
            ext[x] = total[x] - rows[i, x]
        _fill(ext, &v[i, 0], c[i], m, idx, key, br)
        shift = 0.0
        for x in range(m):
            shift += fabs(rows[i, x] - br[x])
        shift *= 0.5
        if out != NULL:
            out[i] = shift
        if shift > best:
            best = shift
    return best


def displacements(double[:, ::1] values, double[::1] contributions, double[:, ::1] rows):
    cdef int n = rows.shape[0], m = rows.shape[1]
    res = np.zeros(n)
    cdef double[::1] r = res
    cdef double* total = <double*> malloc(m * sizeof(double))
    cdef double* ext = <double*> malloc(m * sizeof(double))
    cdef double* br = <double*> malloc(m * sizeof(double))
    cdef int* idx = <int*> malloc(m * sizeof(int))
    cdef double* key = <double*> malloc(m * sizeof(double))
    _displacements(values, contributions, rows, total, ext, br, idx, key, &r[0])
    free(total); free(ext); free(br); free(idx); free(key)
    return res


def redistribute(double[:, ::1] values, double[::1] contributions, rows_in,
                 long[::1] order, long max_rounds, double tol):
    rows_arr = np.array(rows_in, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] rows = rows_arr
    cdef int n = rows.shape[0], m = rows.shape[1], i, x
    cdef long period = order.shape[0], t = 0
    cdef double shift, sweep_max = 0.0, residual = INFINITY
    cdef double* total = <double*> malloc(m * sizeof(double))
    cdef double* ext = <double*> malloc(m * sizeof(double))
    cdef double* br = <double*> malloc(m * sizeof(double))
    cdef int* idx = <int*> malloc(m * sizeof(int))
    cdef double* key = <double*> malloc(m * sizeof(double))
    with nogil:
        for x in range(m):
            total[x] = 0.0
        for i in range(n):
            for x in range(m):
                total[x] += rows[i, x]
        while t < max_rounds:
            i = order[t % period]
            for x in range(m):
                ext[x] = total[x] - rows[i, x]
            _fill(ext, &values[i, 0], contributions[i], m, idx, key, br)
            shift = 0.0
            for x in range(m):
                shift += fabs(rows[i, x] - br[x])
            shift *= 0.5
            if shift > sweep_max:
                sweep_max = shift
            for x in range(m):
                rows[i, x] = br[x]
                total[x] = ext[x] + br[x]
            t += 1
            if t % period == 0:
                for x in range(m):
                    total[x] = 0.0
                for i in range(n):
                    for x in range(m):
                        total[x] += rows[i, x]
                if sweep_max <= tol:
                    residual = _displacements(values, contributions, rows, total, ext, br, idx, key, NULL)
                    if residual <= tol:
                        break
                    residual = INFINITY
                    for x in range(m):
                        total[x] = 0.0
                    for i in range(n):
                        for x in range(m):
                            total[x] += rows[i, x]
                sweep_max = 0.0
    free(total); free(ext); free(br); free(idx); free(key)
    return rows_arr, t, residual


def spend(double[:, ::1] values, double[::1] contributions, long[::1] order, long rounds, long window):
    cdef int n = values.shape[0], m = values.shape[1], i, x
    cdef long period = order.shape[0], t, s, slot, filled = 0
    cum_arr = np.zeros((n, m))
    counts_arr = np.zeros(n, dtype=np.int64)
    hist_arr = np.zeros((max(window, 1), m))
    cdef double[:, ::1] cum = cum_arr
    cdef long[::1] counts = counts_arr
    cdef double[:, ::1] hist = hist_arr
    cdef double* ext = <double*> malloc(m * sizeof(double))
    cdef double* br = <double*> malloc(m * sizeof(double))
    cdef int* idx = <int*> malloc(m * sizeof(int))
    cdef double* key = <double*> malloc(m * sizeof(double))
    with nogil:
        for t in range(rounds):
            i = order[t % period]
            for x in range(m):
                ext[x] = 0.0
            for s in range(filled):
                for x in range(m):
                    ext[x] += hist[s, x]
            _fill(ext, &values[i, 0], contributions[i], m, idx, key, br)
            if window > 0:
                slot = t % window
                for x in range(m):
                    hist[slot, x] = br[x]
                if filled < window:
                    filled += 1
            for x in range(m):
                cum[i, x] += br[x]
            counts[i] += 1
    free(ext); free(br); free(idx); free(key)
    return cum_arr, counts_arr
