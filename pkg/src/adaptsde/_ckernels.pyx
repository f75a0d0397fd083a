# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, sin, fabs
from libc.stdint cimport uint32_t, uint64_t

cnp.import_array()

BACKEND = "cython"

cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t c0 = c[0], c1 = c[1], c2 = c[2], c3 = c[3]
    cdef int r
    for r in range(10):
        p0 = <uint64_t>0xD2511F53 * c0
        p1 = <uint64_t>0xCD9E8D57 * c2
        c0 = <uint32_t>(p1 >> 32) ^ c1 ^ k0
        c1 = <uint32_t>p1
        c2 = <uint32_t>(p0 >> 32) ^ c3 ^ k1
        c3 = <uint32_t>p0
        k0 = k0 + <uint32_t>0x9E3779B9
        k1 = k1 + <uint32_t>0xBB67AE85
    c[0] = c0
    c[1] = c1
    c[2] = c2
    c[3] = c3


cdef inline double _unit(uint32_t hi, uint32_t lo) noexcept nogil:
    return ((hi >> 5) * 67108864.0 + (lo >> 6)) * INV_2_53


def philox4x32(c0, c1, c2, c3, k0, k1):
    cdef uint32_t c[4]
    c[0] = <uint32_t>c0
    c[1] = <uint32_t>c1
    c[2] = <uint32_t>c2
    c[3] = <uint32_t>c3
    _philox(c, <uint32_t>(k0 & 0xFFFFFFFF), <uint32_t>(k1 & 0xFFFFFFFF))
    return c[0], c[1], c[2], c[3]


def normals(seed, streams, counters, Py_ssize_t d, tag=0):
    cdef cnp.uint64_t[::1] s = np.ascontiguousarray(streams, dtype=np.uint64)
    cdef cnp.uint64_t[::1] k = np.ascontiguousarray(counters, dtype=np.uint64)
    cdef Py_ssize_t n = s.shape[0], i, b, j
    cdef Py_ssize_t nb = (d + 1) // 2
    cdef uint64_t sd = (<uint64_t>int(seed & 0xFFFFFFFFFFFFFFFF))
    cdef uint32_t k0 = <uint32_t>sd, k1 = <uint32_t>(sd >> 32)
    cdef uint32_t t = <uint32_t>tag
    cdef uint32_t c[4]
    cdef double r, a
    out = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for b in range(nb):
                c[0] = <uint32_t>b
                c[1] = <uint32_t>k[i]
                c[2] = <uint32_t>s[i]
                c[3] = t
                _philox(c, k0, k1)
                r = sqrt(-2.0 * log(1.0 - _unit(c[0], c[1])))
                a = TWO_PI * _unit(c[2], c[3])
                j = 2 * b
                o[i, j] = r * cos(a)
                if j + 1 < d:
                    o[i, j + 1] = r * sin(a)
    return out


def signs(seed, streams, counters, tag=1):
    cdef cnp.uint64_t[::1] s = np.ascontiguousarray(streams, dtype=np.uint64)
    cdef cnp.uint64_t[::1] k = np.ascontiguousarray(counters, dtype=np.uint64)
    cdef Py_ssize_t n = s.shape[0], i
    cdef uint64_t sd = (<uint64_t>int(seed & 0xFFFFFFFFFFFFFFFF))
    cdef uint32_t k0 = <uint32_t>sd, k1 = <uint32_t>(sd >> 32)
    cdef uint32_t t = <uint32_t>tag
    cdef uint32_t c[4]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            c[0] = 0
            c[1] = <uint32_t>k[i]
            c[2] = <uint32_t>s[i]
            c[3] = t
            _philox(c, k0, k1)
            o[i] = 1.0 if (c[0] & 1) else -1.0
    return out


def scaled_error(x_em, x_heun, x_prev, double eps_abs, double eps_rel, bint linf):
    cdef double[:, ::1] a = np.ascontiguousarray(x_em, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(x_heun, dtype=np.float64)
    cdef double[:, ::1] p
    cdef bint use_prev = x_prev is not None
    if use_prev:
        p = np.ascontiguousarray(x_prev, dtype=np.float64)
    else:
        p = a
    cdef Py_ssize_t n = a.shape[0], d = a.shape[1], i, j
    cdef double mag, delta, q, acc
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(d):
                mag = fabs(a[i, j])
                if use_prev and fabs(p[i, j]) > mag:
                    mag = fabs(p[i, j])
                delta = eps_rel * mag
                if delta < eps_abs:
                    delta = eps_abs
                q = (a[i, j] - b[i, j]) / delta
                if linf:
                    q = fabs(q)
                    if q > acc:
                        acc = q
                else:
                    acc += q * q
            o[i] = acc if linf else sqrt(acc / d)
    return out


def linear_scheme_paths(double factor, double noise_scale, double y0,
                        Py_ssize_t n_paths, Py_ssize_t n_steps, seed, tag,
                        Py_ssize_t stream_offset=0):
    cdef uint64_t sd = (<uint64_t>int(seed & 0xFFFFFFFFFFFFFFFF))
    cdef uint32_t k0 = <uint32_t>sd, k1 = <uint32_t>(sd >> 32)
    cdef uint32_t t = <uint32_t>tag
    cdef uint32_t c[4]
    cdef Py_ssize_t p, k
    cdef double y, r, a, z, spare = 0.0
    out = np.empty(n_paths, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for p in range(n_paths):
            y = y0
            for k in range(n_steps):
                if k % 2 == 0:
                    c[0] = <uint32_t>(k // 2)
                    c[1] = 0
                    c[2] = <uint32_t>(stream_offset + p)
                    c[3] = t
                    _philox(c, k0, k1)
                    r = sqrt(-2.0 * log(1.0 - _unit(c[0], c[1])))
                    a = TWO_PI * _unit(c[2], c[3])
                    z = r * cos(a)
                    spare = r * sin(a)
                else:
                    z = spare
                y = factor * y + noise_scale * z
            o[p] = y
    return out
