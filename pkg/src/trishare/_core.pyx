# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the replicated-share hot loops.

Each kernel fuses the three local cross terms of the replicated product
(lo*lo + hi*lo + lo*hi) into a single pass over uint64 buffers, which is
where a secure forward pass spends almost all of its local compute.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef unsigned long long u64


def rep_mul(cnp.ndarray x_lo, cnp.ndarray x_hi, cnp.ndarray y_lo, cnp.ndarray y_hi):
    """Elementwise x_lo*y_lo + x_hi*y_lo + x_lo*y_hi (mod 2^64)."""
    cdef cnp.ndarray[u64, ndim=1] a = np.ascontiguousarray(x_lo, dtype=np.uint64).reshape(-1)
    cdef cnp.ndarray[u64, ndim=1] b = np.ascontiguousarray(x_hi, dtype=np.uint64).reshape(-1)
    cdef cnp.ndarray[u64, ndim=1] c = np.ascontiguousarray(y_lo, dtype=np.uint64).reshape(-1)
    cdef cnp.ndarray[u64, ndim=1] d = np.ascontiguousarray(y_hi, dtype=np.uint64).reshape(-1)
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[u64, ndim=1] out = np.empty(n, dtype=np.uint64)
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = a[i] * c[i] + b[i] * c[i] + a[i] * d[i]
    return out.reshape(np.asarray(x_lo).shape)


def rep_square(cnp.ndarray x_lo, cnp.ndarray x_hi):
    """Elementwise x_lo^2 + 2*x_lo*x_hi (mod 2^64)."""
    cdef cnp.ndarray[u64, ndim=1] a = np.ascontiguousarray(x_lo, dtype=np.uint64).reshape(-1)
    cdef cnp.ndarray[u64, ndim=1] b = np.ascontiguousarray(x_hi, dtype=np.uint64).reshape(-1)
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[u64, ndim=1] out = np.empty(n, dtype=np.uint64)
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = a[i] * a[i] + 2 * a[i] * b[i]
    return out.reshape(np.asarray(x_lo).shape)


def rep_matmul(cnp.ndarray x_lo, cnp.ndarray x_hi, cnp.ndarray y_lo, cnp.ndarray y_hi):
    """Matrix product A@B of replicated shares: one fused (m,k)x(k,n) pass."""
    cdef cnp.ndarray[u64, ndim=2] a = np.ascontiguousarray(x_lo, dtype=np.uint64)
    cdef cnp.ndarray[u64, ndim=2] b = np.ascontiguousarray(x_hi, dtype=np.uint64)
    cdef cnp.ndarray[u64, ndim=2] c = np.ascontiguousarray(y_lo, dtype=np.uint64)
    cdef cnp.ndarray[u64, ndim=2] d = np.ascontiguousarray(y_hi, dtype=np.uint64)
    cdef Py_ssize_t m = a.shape[0]
    cdef Py_ssize_t k = a.shape[1]
    cdef Py_ssize_t n = c.shape[1]
    cdef cnp.ndarray[u64, ndim=2] out = np.zeros((m, n), dtype=np.uint64)
    cdef Py_ssize_t i, j, l
    cdef u64 al, bl
    for i in range(m):
        for l in range(k):
            al = a[i, l]
            bl = b[i, l]
            for j in range(n):
                out[i, j] += al * c[l, j] + bl * c[l, j] + al * d[l, j]
    return out
