# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, NAN

cnp.import_array()

cdef double _INVPHI = (sqrt(5.0) - 1.0) / 2.0


def scaled_recurrence(decay, incr):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d = np.ascontiguousarray(decay, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c = np.ascontiguousarray(incr, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n + 1)
    cdef double acc = 0.0
    out[0] = 0.0
    for i in range(n):
        if d[i] != 0.0:
            acc = acc * d[i] + c[i]
        else:
            acc = c[i]
        out[i + 1] = acc
    return out


def compensated_cumsum(x):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n + 1)
    cdef double s = 0.0, comp = 0.0, t, vi
    out[0] = 0.0
    for i in range(n):
        vi = v[i]
        t = s + vi
        if fabs(s) >= fabs(vi):
            comp += (s - t) + vi
        else:
            comp += (vi - t) + s
        s = t
        out[i + 1] = s + comp
    return out


def fd_residual(du, coef, f, double h):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dd = np.ascontiguousarray(du, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cc = np.ascontiguousarray(coef, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ff = np.ascontiguousarray(f, dtype=np.float64)
    cdef Py_ssize_t n = dd.shape[0] + 1, i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double d2, d1
    out[0] = NAN
    out[n - 1] = NAN
    for i in range(1, n - 1):
        d2 = (dd[i] - dd[i - 1]) / (h * h)
        d1 = (dd[i] + dd[i - 1]) / (2.0 * h)
        out[i] = d2 + cc[i] * d1 - ff[i]
    return out


def golden_max(f, double a, double b, double xtol, int maxiter):
    cdef double fa = f(a), fb = f(b)
    cdef double best_x, best_f, c, d, fc, fd
    cdef int it
    if fa >= fb:
        best_x, best_f = a, fa
    else:
        best_x, best_f = b, fb
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = f(c)
    fd = f(d)
    for it in range(maxiter):
        if fabs(b - a) <= xtol:
            break
        if fc >= fd:
            b = d
            d = c
            fd = fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a = c
            c = d
            fc = fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    if fc > best_f:
        best_x, best_f = c, fc
    if fd > best_f:
        best_x, best_f = d, fd
    return best_x, best_f
