# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. See ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow

cnp.import_array()

ctypedef cnp.int64_t i64
ctypedef cnp.uint64_t u64


def coalition_worths(i64[::1] offsets, i64[::1] members, double[::1] rate,
                     double[::1] ubits, i64[::1] utable, double[::1] slot,
                     double[::1] t0, double[::1] tc, double[::1] ap_rate,
                     double[:, ::1] beta, double ap_bits, bint downlink):
    cdef Py_ssize_t n_coal = offsets.shape[0] - 1
    if n_coal < 1:
        return np.zeros(0)
    out = np.empty(n_coal, dtype=np.float64)
    cdef double[::1] v = out
    cdef Py_ssize_t c, j, u
    cdef i64 tab, n, k
    cdef double s, b, air_s, bits, air, q1, denom
    cdef int dl = 1 if downlink else 0
    for c in range(n_coal):
        tab = utable[members[offsets[c]]]
        air_s = 0.0
        bits = 0.0
        for j in range(offsets[c], offsets[c + 1]):
            u = members[j]
            if utable[u] < tab:
                tab = utable[u]
            air_s += ubits[u] / rate[u]
            bits += ubits[u]
        k = offsets[c + 1] - offsets[c]
        n = k + dl
        s = slot[tab]
        b = beta[tab, n]
        air = air_s / s + k * t0[tab]
        if dl:
            air += ap_bits / (ap_rate[tab] * s) + t0[tab]
            bits += ap_bits
        q1 = pow(1.0 - b, <double>(n - 1))
        denom = 1.0 + b * q1 * air + (1.0 - pow(1.0 - b, <double>n) - n * b * q1) * tc[tab]
        v[c] = bits * b * pow(1.0 - b, <double>n) / denom / s
    return out


def first_admissible(u64[::1] masks, u64 allowed):
    cdef Py_ssize_t i
    cdef u64 forbidden = ~allowed
    for i in range(masks.shape[0]):
        if (masks[i] & forbidden) == 0:
            return i
    return -1


def min_key_per_user(u64[::1] masks, i64[::1] keys, Py_ssize_t n_users):
    out = np.full(n_users, np.iinfo(np.int64).max, dtype=np.int64)
    cdef i64[::1] o = out
    cdef Py_ssize_t i, u
    cdef u64 m
    for i in range(masks.shape[0]):
        m = masks[i]
        u = 0
        while m:
            if m & 1:
                if keys[i] < o[u]:
                    o[u] = keys[i]
            m >>= 1
            u += 1
    return out
