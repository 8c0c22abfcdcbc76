# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled statistic kernels (Cython backend).

Same contracts as ``supprec.kernels._python``; accumulation runs in sample,
then row, then coordinate order so each call is deterministic.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def proxy_correlations(object phi_in, object y_in):
    """Correlate every measurement column with its observation vector."""
    cdef const double[:, :, ::1] phi = np.ascontiguousarray(phi_in, dtype=np.float64)
    cdef const double[:, ::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t n = phi.shape[0]
    cdef Py_ssize_t m = phi.shape[1]
    cdef Py_ssize_t d = phi.shape[2]
    out_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, u
    cdef double yij
    for i in range(n):
        for j in range(m):
            yij = y[i, j]
            for u in range(d):
                out[i, u] += yij * phi[i, j, u]
    return out_arr


def support_statistic(object phi_in, object y_in):
    """Per-coordinate mean of squared column-observation correlations."""
    cdef const double[:, :, ::1] phi = np.ascontiguousarray(phi_in, dtype=np.float64)
    cdef const double[:, ::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t n = phi.shape[0]
    cdef Py_ssize_t m = phi.shape[1]
    cdef Py_ssize_t d = phi.shape[2]
    lam_arr = np.zeros(d, dtype=np.float64)
    prox_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] lam = lam_arr
    cdef double[::1] prox = prox_arr
    cdef Py_ssize_t i, j, u
    cdef double yij
    for i in range(n):
        for u in range(d):
            prox[u] = 0.0
        for j in range(m):
            yij = y[i, j]
            for u in range(d):
                prox[u] += yij * phi[i, j, u]
        for u in range(d):
            lam[u] += prox[u] * prox[u]
    for u in range(d):
        lam[u] /= n
    return lam_arr


def column_sq_norms(object phi_in):
    """Squared Euclidean norm of every column: (n, m, d) -> (n, d)."""
    cdef const double[:, :, ::1] phi = np.ascontiguousarray(phi_in, dtype=np.float64)
    cdef Py_ssize_t n = phi.shape[0]
    cdef Py_ssize_t m = phi.shape[1]
    cdef Py_ssize_t d = phi.shape[2]
    out_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, u
    cdef double v
    for i in range(n):
        for j in range(m):
            for u in range(d):
                v = phi[i, j, u]
                out[i, u] += v * v
    return out_arr
