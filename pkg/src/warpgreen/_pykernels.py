"""Pure-Python versions of the hot loops.

Each function here has a twin in ``_ckernels.pyx`` with identical semantics;
``warpgreen._kernels`` picks one at import time.
"""

from __future__ import annotations

import math

import numpy as np

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def scaled_recurrence(decay, incr):
    """Return J with J[0] = 0 and J[i+1] = J[i] * decay[i] + incr[i]."""
    decay = np.asarray(decay, dtype=float)
    incr = np.asarray(incr, dtype=float)
    out = np.empty(decay.size + 1)
    acc = 0.0
    out[0] = 0.0
    for i in range(decay.size):
        d = decay[i]
        acc = (acc * d if d != 0.0 else 0.0) + incr[i]
        out[i + 1] = acc
    return out


def compensated_cumsum(x):
    """Cumulative sum with Neumaier compensation; output[0] = 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.size + 1)
    s = 0.0
    c = 0.0
    out[0] = 0.0
    for i in range(x.size):
        v = x[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i + 1] = s + c
    return out


def fd_residual(du, coef, f, h):
    """Central-difference residual u'' + coef * u' - f from increments du = diff(u).

    Differencing the increments rather than ``u`` itself avoids cancelling
    two large nearly equal values.  Entries 0 and -1 are nan.
    """
    du = np.asarray(du, dtype=float)
    coef = np.asarray(coef, dtype=float)
    f = np.asarray(f, dtype=float)
    out = np.full(du.size + 1, np.nan)
    d2 = (du[1:] - du[:-1]) / (h * h)
    d1 = (du[1:] + du[:-1]) / (2.0 * h)
    out[1:-1] = d2 + coef[1:-1] * d1 - f[1:-1]
    return out


def golden_max(f, a, b, xtol, maxiter):
    """Golden-section search for a maximum of a unimodal ``f`` on [a, b].

    Returns (x, f(x)) for the best point seen, endpoints included.
    """
    fa = f(a)
    fb = f(b)
    best_x, best_f = (a, fa) if fa >= fb else (b, fb)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = f(c)
    fd = f(d)
    for _ in range(maxiter):
        if abs(b - a) <= xtol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    for x, fx in ((c, fc), (d, fd)):
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f
