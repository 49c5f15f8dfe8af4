# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. ``_kernels_py`` holds the reference versions."""
from libc.stdint cimport uint32_t, int64_t
from libc.stdlib cimport malloc, free

import numpy as np


def lcs_length(a, b):
    cdef int64_t[::1] xa = np.ascontiguousarray(a, dtype=np.int64)
    cdef int64_t[::1] xb = np.ascontiguousarray(b, dtype=np.int64)
    if xa.shape[0] < xb.shape[0]:
        xa, xb = xb, xa
    cdef Py_ssize_t n = xa.shape[0], m = xb.shape[0], i, j
    if m == 0:
        return 0
    cdef int64_t *prev = <int64_t *> malloc((m + 1) * sizeof(int64_t))
    cdef int64_t *cur = <int64_t *> malloc((m + 1) * sizeof(int64_t))
    cdef int64_t *tmp
    cdef int64_t result
    if prev == NULL or cur == NULL:
        free(prev)
        free(cur)
        raise MemoryError()
    for j in range(m + 1):
        prev[j] = 0
    cur[0] = 0
    for i in range(n):
        for j in range(m):
            if xa[i] == xb[j]:
                cur[j + 1] = prev[j] + 1
            elif cur[j] > prev[j + 1]:
                cur[j + 1] = cur[j]
            else:
                cur[j + 1] = prev[j + 1]
        tmp = prev
        prev = cur
        cur = tmp
    result = prev[m]
    free(prev)
    free(cur)
    return int(result)


cdef uint32_t C1 = 0xCC9E2D51u
cdef uint32_t C2 = 0x1B873593u
cdef uint32_t C3 = 0xE6546B64u
cdef uint32_t F1 = 0x85EBCA6Bu
cdef uint32_t F2 = 0xC2B2AE35u


cdef inline uint32_t _rotl(uint32_t x, int r) nogil:
    return (x << r) | (x >> (32 - r))


cdef uint32_t _murmur(const unsigned char *data, Py_ssize_t n, uint32_t seed) nogil:
    cdef uint32_t c1 = C1, c2 = C2
    cdef uint32_t h = seed, k
    cdef Py_ssize_t nblocks = n // 4, i
    for i in range(nblocks):
        k = (<uint32_t> data[4 * i] | (<uint32_t> data[4 * i + 1] << 8)
             | (<uint32_t> data[4 * i + 2] << 16) | (<uint32_t> data[4 * i + 3] << 24))
        k = _rotl(k * c1, 15) * c2
        h ^= k
        h = _rotl(h, 13) * 5 + C3
    k = 0
    i = nblocks * 4
    if n - i >= 3:
        k ^= <uint32_t> data[i + 2] << 16
    if n - i >= 2:
        k ^= <uint32_t> data[i + 1] << 8
    if n - i >= 1:
        k ^= data[i]
        k = _rotl(k * c1, 15) * c2
        h ^= k
    h ^= <uint32_t> n
    h ^= h >> 16
    h *= F1
    h ^= h >> 13
    h *= F2
    h ^= h >> 16
    return h


def murmurhash3_32(bytes data, seed=0):
    return _murmur(<const unsigned char *> data, len(data), <uint32_t> (seed & 0xFFFFFFFF))


def hash_features(keys, seed, dim):
    cdef uint32_t s = <uint32_t> (seed & 0xFFFFFFFF)
    cdef uint32_t mask = <uint32_t> (dim - 1)
    cdef uint32_t h
    cdef bytes raw
    out = []
    for key in keys:
        raw = key.encode("utf-8")
        h = _murmur(<const unsigned char *> raw, len(raw), s)
        out.append((h & mask, 1.0 if (h >> 31) == 0 else -1.0))
    return out
