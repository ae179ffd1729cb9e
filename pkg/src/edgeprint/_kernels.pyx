# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Mirrors ``_pykernels`` exactly."""
import numpy as np

from libc.math cimport fabs

cdef unsigned int CRC15_POLY = 0x4599


def crc15(const unsigned char[::1] bits):
    cdef unsigned int crc = 0, nxt
    cdef Py_ssize_t i
    for i in range(bits.shape[0]):
        nxt = (bits[i] ^ (crc >> 14)) & 1
        crc = (crc << 1) & 0x7FFF
        if nxt:
            crc ^= CRC15_POLY
    return crc


def stuff_bits(const unsigned char[::1] bits):
    cdef Py_ssize_t n = bits.shape[0], i, j = 0
    out = np.empty(n + n // 4 + 1, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    cdef int run = 0
    cdef unsigned char last = 2, b
    for i in range(n):
        b = bits[i]
        o[j] = b
        j += 1
        if b == last:
            run += 1
        else:
            run = 1
            last = b
        if run == 5:
            last = 1 - b
            o[j] = last
            j += 1
            run = 1
    return out[:j].copy()


def destuff_bits(const unsigned char[::1] bits):
    cdef Py_ssize_t n = bits.shape[0], i, j = 0
    out = np.empty(n, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    cdef int run = 0
    cdef bint skip = False
    cdef unsigned char last = 2, b
    for i in range(n):
        b = bits[i]
        if skip:
            if b == last:
                raise ValueError(f"stuff error at bit {i}: expected complement of {last}")
            last = b
            run = 1
            skip = False
            continue
        o[j] = b
        j += 1
        if b == last:
            run += 1
        else:
            run = 1
            last = b
        if run == 5:
            skip = True
    if skip:
        raise ValueError("stream ends where a stuff bit is required")
    return out[:j].copy()


def rising_edges(const unsigned char[::1] bits, Py_ssize_t window_bits):
    cdef Py_ssize_t stop = min(window_bits, bits.shape[0] - 1), k, j = 0
    out = np.empty(max(stop, 0), dtype=np.int64)
    cdef long long[::1] o = out
    for k in range(1, stop + 1):
        if bits[k - 1] == 0 and bits[k] == 1:
            o[j] = k
            j += 1
    return out[:j].copy()


def relief_f_weights(const double[:, ::1] x, const long long[::1] y,
                     const long long[::1] order, int k, const double[::1] priors):
    cdef Py_ssize_t n = x.shape[0], nf = x.shape[1], m = order.shape[0]
    cdef Py_ssize_t n_classes = priors.shape[0]
    cdef Py_ssize_t t, r, j, a, c, p, cr
    cdef double d, scale = 1.0 / (m * k), coef
    w_arr = np.zeros(nf)
    cdef double[::1] w = w_arr
    best_d_arr = np.empty((n_classes, k))
    best_i_arr = np.empty((n_classes, k), dtype=np.int64)
    cnt_arr = np.empty(n_classes, dtype=np.int64)
    cdef double[:, ::1] best_d = best_d_arr
    cdef long long[:, ::1] best_i = best_i_arr
    cdef long long[::1] cnt = cnt_arr

    for t in range(m):
        r = order[t]
        cr = y[r]
        for c in range(n_classes):
            cnt[c] = 0
        for j in range(n):
            if j == r:
                continue
            d = 0.0
            for a in range(nf):
                d += fabs(x[j, a] - x[r, a])
            c = y[j]
            if cnt[c] < k:
                p = cnt[c]
                cnt[c] += 1
            elif d < best_d[c, k - 1]:
                p = k - 1
            else:
                continue
            # strict comparison keeps the lower index first on ties
            while p > 0 and best_d[c, p - 1] > d:
                best_d[c, p] = best_d[c, p - 1]
                best_i[c, p] = best_i[c, p - 1]
                p -= 1
            best_d[c, p] = d
            best_i[c, p] = j
        for c in range(n_classes):
            if c == cr:
                coef = -scale
            else:
                coef = scale * priors[c] / (1.0 - priors[cr])
            for p in range(cnt[c]):
                j = best_i[c, p]
                for a in range(nf):
                    w[a] += coef * fabs(x[j, a] - x[r, a])
    return w_arr
