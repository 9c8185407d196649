# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled graph kernels. Mirrors :mod:`cofree._pykernels` exactly."""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t, uint8_t, uint64_t

ctypedef fused real:
    float
    double


def neighbor_sum(const int64_t[::1] indptr, const int64_t[::1] indices,
                 const int64_t[::1] edge_ids, keep, real[:, ::1] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t v, k, c, u
    cdef const uint8_t[::1] km
    cdef bint masked = keep is not None
    if masked:
        km = keep
    dtype = np.float32 if real is float else np.float64
    out_arr = np.zeros((n, d), dtype=dtype)
    cdef real[:, ::1] out = out_arr
    with nogil:
        for v in range(n):
            for k in range(indptr[v], indptr[v + 1]):
                if masked and not km[edge_ids[k]]:
                    continue
                u = indices[k]
                for c in range(d):
                    out[v, c] += x[u, c]
    return out_arr


def masked_degree(const int64_t[::1] indptr, const int64_t[::1] edge_ids, keep):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t v, k
    cdef const uint8_t[::1] km
    deg_arr = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] deg = deg_arr
    if keep is None:
        for v in range(n):
            deg[v] = indptr[v + 1] - indptr[v]
        return deg_arr
    km = keep
    with nogil:
        for v in range(n):
            for k in range(indptr[v], indptr[v + 1]):
                if km[edge_ids[k]]:
                    deg[v] += 1
    return deg_arr


def replica_counts(const int64_t[::1] src, const int64_t[::1] dst,
                   const int64_t[::1] assignment, Py_ssize_t num_nodes,
                   Py_ssize_t num_parts):
    """Number of distinct parts touching each node."""
    cdef Py_ssize_t m = src.shape[0]
    cdef Py_ssize_t e, q, a, b
    seen_arr = np.zeros(num_nodes * num_parts, dtype=np.uint8)
    counts_arr = np.zeros(num_nodes, dtype=np.int64)
    cdef uint8_t[::1] seen = seen_arr
    cdef int64_t[::1] counts = counts_arr
    with nogil:
        for e in range(m):
            q = assignment[e]
            a = src[e] * num_parts + q
            b = dst[e] * num_parts + q
            if not seen[a]:
                seen[a] = 1
                counts[src[e]] += 1
            if not seen[b]:
                seen[b] = 1
                counts[dst[e]] += 1
    return counts_arr


def mix64(const uint64_t[::1] keys, uint64_t seed):
    """splitmix64 finalizer applied to ``key ^ seed``."""
    cdef Py_ssize_t n = keys.shape[0]
    cdef Py_ssize_t i
    cdef uint64_t z
    out_arr = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] out = out_arr
    with nogil:
        for i in range(n):
            z = (keys[i] ^ seed) + 0x9E3779B97F4A7C15ULL
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
            out[i] = z ^ (z >> 31)
    return out_arr


def distinct_per_row(const int64_t[:, ::1] draws, Py_ssize_t num_values):
    """Count distinct values in each row; values lie in [0, num_values)."""
    cdef Py_ssize_t t = draws.shape[0]
    cdef Py_ssize_t d = draws.shape[1]
    cdef Py_ssize_t r, c
    cdef int64_t v
    stamp_arr = np.full(num_values, -1, dtype=np.int64)
    out_arr = np.zeros(t, dtype=np.int64)
    cdef int64_t[::1] stamp = stamp_arr
    cdef int64_t[::1] out = out_arr
    with nogil:
        for r in range(t):
            for c in range(d):
                v = draws[r, c]
                if stamp[v] != r:
                    stamp[v] = r
                    out[r] += 1
    return out_arr
