# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel lane.

Fuses the distance / similarity inner loops that dominate a training
step at small batch sizes, where per-call numpy overhead is the cost.
Contracts match ``_pykernels.py`` exactly.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log, sqrt

cnp.import_array()

LANE = "compiled"


def pairwise_sqdist(x, p):
    """Squared euclidean distances between rows of x (B, d) and p (M, d)."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t b = xv.shape[0], m = pv.shape[0], d = xv.shape[1]
    out = np.empty((b, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(b):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                diff = xv[i, k] - pv[j, k]
                acc += diff * diff
            ov[i, j] = acc
    return out


def similarity_forward(x, p, double epsilon):
    """Distance-based similarity scores between rows of x and p.

    Returns (scores, sqdist, dscore_dsqdist) with
    score(t) = 2*log((t + 1) / (t + epsilon)).
    """
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t b = xv.shape[0], m = pv.shape[0], d = xv.shape[1]
    scores = np.empty((b, m), dtype=np.float64)
    d2 = np.empty((b, m), dtype=np.float64)
    dscores = np.empty((b, m), dtype=np.float64)
    cdef double[:, ::1] sv = scores, dv = d2, gv = dscores
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(b):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                diff = xv[i, k] - pv[j, k]
                acc += diff * diff
            dv[i, j] = acc
            sv[i, j] = 2.0 * (log(acc + 1.0) - log(acc + epsilon))
            gv[i, j] = 2.0 * (1.0 / (acc + 1.0) - 1.0 / (acc + epsilon))
    return scores, d2, dscores


def cosine_assign(x, c):
    """Index of the max-cosine row of c for every row of x.

    Zero rows count as cosine 0; ties resolve to the lowest index.
    """
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = cv.shape[0], d = xv.shape[1]
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] ov = out
    cnorm = np.empty(m, dtype=np.float64)
    cdef double[::1] cnv = cnorm
    cdef Py_ssize_t i, j, k
    cdef double acc, xn, cos, best
    cdef Py_ssize_t best_j
    for j in range(m):
        acc = 0.0
        for k in range(d):
            acc += cv[j, k] * cv[j, k]
        cnv[j] = sqrt(acc)
    for i in range(n):
        acc = 0.0
        for k in range(d):
            acc += xv[i, k] * xv[i, k]
        xn = sqrt(acc)
        best = -2.0
        best_j = 0
        for j in range(m):
            if xn > 0.0 and cnv[j] > 0.0:
                acc = 0.0
                for k in range(d):
                    acc += xv[i, k] * cv[j, k]
                cos = acc / (xn * cnv[j])
            else:
                cos = 0.0
            if cos > best:
                best = cos
                best_j = j
        ov[i] = best_j
    return out
