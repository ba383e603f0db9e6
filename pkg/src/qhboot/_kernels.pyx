# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled kernels; see ``_kernels_python`` for the reference versions."""
import numpy as np
cimport numpy as cnp
from libcpp.map cimport map as cmap
from libcpp.utility cimport pair
from cython.operator cimport dereference as deref, preincrement as inc, predecrement as dec

cnp.import_array()

__all__ = ["bl_chain_value", "circular_counts"]


cdef double _chain(const double[::1] x, const double[::1] c) noexcept nogil:
    cdef Py_ssize_t J = x.shape[0]
    cdef cmap[double, double] bp
    cdef cmap[double, double].iterator it
    cdef double A, s0, total, shift, d, w, p, excess, cj, val
    cdef Py_ssize_t j

    A = -c[0]
    s0 = -1.0
    total = 2.0
    shift = 0.0
    bp[-c[0]] += 2.0

    for j in range(1, J):
        d = x[j] - x[j - 1]
        s0 -= d
        bp[-shift] += 2.0 * d
        total += 2.0 * d
        while s0 < -1.0:
            it = bp.begin()
            p = deref(it).first + shift
            w = deref(it).second
            if s0 + w <= -1.0:
                bp.erase(it)
                A -= w * p
                s0 += w
                total -= w
            else:
                A += (s0 + 1.0) * p
                deref(it).second = w - (-1.0 - s0)
                total -= -1.0 - s0
                s0 = -1.0
        while s0 + total > 1.0:
            it = bp.end()
            dec(it)
            w = deref(it).second
            excess = s0 + total - 1.0
            if w <= excess:
                bp.erase(it)
                total -= w
            else:
                deref(it).second = w - excess
                total -= excess
        cj = c[j]
        A += s0 * cj
        shift -= cj

    val = A
    it = bp.begin()
    while it != bp.end():
        p = deref(it).first + shift
        if p >= 0.0:
            break
        val += deref(it).second * (0.0 - p)
        inc(it)
    return val


def bl_chain_value(x, c):
    """Optimal value of ``max sum_j c_j f_j`` over ``|f_j| <= 1`` and
    ``|f_{j+1} - f_j| <= x_{j+1} - x_j`` (``x`` sorted)."""
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef double out
    if xv.shape[0] != cv.shape[0]:
        raise ValueError("x and c must have the same length")
    if xv.shape[0] == 0:
        return 0.0
    if xv.shape[0] == 1:
        return abs(cv[0])
    with nogil:
        out = _chain(xv, cv)
    return out


def circular_counts(starts, Py_ssize_t n, Py_ssize_t ell):
    """Block-membership counts for circular blocks with 1-based ``starts``
    of shape ``(k,)`` or ``(B, k)``."""
    arr = np.asarray(starts, dtype=np.int64)
    squeeze = arr.ndim == 1
    cdef const cnp.int64_t[:, ::1] s = np.ascontiguousarray(np.atleast_2d(arr))
    out = np.zeros((s.shape[0], n), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] o = out
    cdef Py_ssize_t b, j, i, st, stop
    with nogil:
        for b in range(s.shape[0]):
            for j in range(s.shape[1]):
                st = s[b, j] - 1
                stop = st + ell
                if stop <= n:
                    for i in range(st, stop):
                        o[b, i] += 1
                else:
                    for i in range(st, n):
                        o[b, i] += 1
                    for i in range(0, stop - n):
                        o[b, i] += 1
    return out[0] if squeeze else out
