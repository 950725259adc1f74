# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch kernels: row softmax, field pivotality, oracle grid values.

Mirrors qtmlab.kernels.pykernels; keep the two in sync.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

BACKEND = "cython"


cdef inline void _softmax_into(const double* z, double* q, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t j
    cdef double mx = z[0]
    cdef double s = 0.0
    for j in range(1, m):
        if z[j] > mx:
            mx = z[j]
    for j in range(m):
        q[j] = exp(z[j] - mx)
        s += q[j]
    for j in range(m):
        q[j] /= s


def softmax_rows(v):
    v_arr = np.ascontiguousarray(v, dtype=np.float64)
    cdef double[:, ::1] vm = v_arr
    cdef Py_ssize_t n = vm.shape[0], m = vm.shape[1]
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            _softmax_into(&vm[i, 0], &out[i, 0], m)
    return out_arr


def rjk_matrix(a, totals, weights):
    a_arr = np.ascontiguousarray(a, dtype=np.float64)
    t_arr = np.ascontiguousarray(totals, dtype=np.float64)
    w_arr = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[::1] av = a_arr
    cdef double[:, ::1] tv = t_arr
    cdef double[::1] wv = w_arr
    cdef Py_ssize_t n = tv.shape[0], m = tv.shape[1]
    r_arr = np.zeros((m, m), dtype=np.float64)
    cdef double[:, ::1] r = r_arr
    z_arr = np.empty(m, dtype=np.float64)
    q_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] z = z_arr
    cdef double[::1] q = q_arr
    cdef Py_ssize_t i, j, k
    cdef double wq
    with nogil:
        for i in range(n):
            for j in range(m):
                z[j] = av[j] + tv[i, j]
            _softmax_into(&z[0], &q[0], m)
            for j in range(m):
                wq = wv[i] * q[j]
                for k in range(m):
                    r[j, k] += wq * q[k]
    return r_arr


def rjk_grad(a, totals, weights):
    a_arr = np.ascontiguousarray(a, dtype=np.float64)
    t_arr = np.ascontiguousarray(totals, dtype=np.float64)
    w_arr = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[::1] av = a_arr
    cdef double[:, ::1] tv = t_arr
    cdef double[::1] wv = w_arr
    cdef Py_ssize_t n = tv.shape[0], m = tv.shape[1]
    r_arr = np.zeros((m, m), dtype=np.float64)
    g_arr = np.zeros((m, m, m), dtype=np.float64)
    cdef double[:, ::1] r = r_arr
    cdef double[:, :, ::1] g = g_arr
    z_arr = np.empty(m, dtype=np.float64)
    q_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] z = z_arr
    cdef double[::1] q = q_arr
    cdef Py_ssize_t i, j, k, l
    cdef double base
    with nogil:
        for i in range(n):
            for j in range(m):
                z[j] = av[j] + tv[i, j]
            _softmax_into(&z[0], &q[0], m)
            for j in range(m):
                for k in range(m):
                    base = wv[i] * q[j] * q[k]
                    r[j, k] += base
                    for l in range(m):
                        g[j, k, l] -= 2.0 * base * q[l]
                    g[j, k, j] += base
                    g[j, k, k] += base
    return r_arr, g_arr


def choice_values(cands, totals, weights, u, chunk=2048):
    # chunk only matters for the numpy backend's memory use; accepted for parity
    c_arr = np.ascontiguousarray(cands, dtype=np.float64)
    t_arr = np.ascontiguousarray(totals, dtype=np.float64)
    w_arr = np.ascontiguousarray(weights, dtype=np.float64)
    u_arr = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[:, ::1] cv = c_arr
    cdef double[:, ::1] tv = t_arr
    cdef double[::1] wv = w_arr
    cdef double[::1] uv = u_arr
    cdef Py_ssize_t b = cv.shape[0], n = tv.shape[0], m = tv.shape[1]
    out_arr = np.empty(b, dtype=np.float64)
    cdef double[::1] out = out_arr
    z_arr = np.empty(m, dtype=np.float64)
    q_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] z = z_arr
    cdef double[::1] q = q_arr
    cdef Py_ssize_t ib, i, j
    cdef double acc, dot
    with nogil:
        for ib in range(b):
            acc = 0.0
            for i in range(n):
                for j in range(m):
                    z[j] = cv[ib, j] + tv[i, j]
                _softmax_into(&z[0], &q[0], m)
                dot = 0.0
                for j in range(m):
                    dot += q[j] * uv[j]
                acc += wv[i] * dot
            out[ib] = acc
    return out_arr


def mean_probs(totals, weights):
    t_arr = np.ascontiguousarray(totals, dtype=np.float64)
    w_arr = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[:, ::1] tv = t_arr
    cdef double[::1] wv = w_arr
    cdef Py_ssize_t n = tv.shape[0], m = tv.shape[1]
    out_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    q_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] q = q_arr
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            _softmax_into(&tv[i, 0], &q[0], m)
            for j in range(m):
                out[j] += wv[i] * q[j]
    return out_arr
