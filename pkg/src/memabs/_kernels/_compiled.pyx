# cython: language_level=3
"""Compiled hot kernels: sliding-window encoding and the affine-Gaussian
state recurrence.  Contracts match ``memabs._kernels._fallback``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def window_codes(symbols, long long n, long long ell):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] s = np.ascontiguousarray(symbols, dtype=np.int64)
    cdef Py_ssize_t length = s.shape[0]
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if length < ell:
        raise ValueError("trace shorter than the window length")
    cdef Py_ssize_t count = length - ell + 1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(count, dtype=np.int64)
    cdef long long head = 1  # n ** (ell - 1)
    cdef Py_ssize_t j
    for j in range(ell - 1):
        head *= n
    # First window, then a rolling update: drop the leading symbol, shift, append.
    cdef long long code = 0
    for j in range(ell):
        code = code * n + s[j]
    out[0] = code
    cdef Py_ssize_t t
    for t in range(1, count):
        code = (code - s[t - 1] * head) * n + s[t + ell - 1]
        out[t] = code
    return out


def affine_gaussian_path(A, m_w, x0, noise):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Ac = np.ascontiguousarray(A, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] mw = np.ascontiguousarray(m_w, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w = np.ascontiguousarray(noise, dtype=np.float64)
    cdef Py_ssize_t horizon = w.shape[0]
    cdef Py_ssize_t d = Ac.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((horizon + 1, d), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.ascontiguousarray(x0, dtype=np.float64).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] nxt = np.empty(d, dtype=np.float64)
    cdef Py_ssize_t k, i, j
    cdef double acc
    for i in range(d):
        out[0, i] = x[i]
    for k in range(horizon):
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += Ac[i, j] * x[j]
            nxt[i] = acc + (mw[i] + w[k, i])
        for i in range(d):
            x[i] = nxt[i]
            out[k + 1, i] = nxt[i]
    return out
