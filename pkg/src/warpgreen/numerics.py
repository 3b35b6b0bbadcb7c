"""Scalar numerics: adaptive quadrature, tail integrals, suprema, power fits.

Integrands are plain callables ``f(x) -> float``.  Callables that also accept
numpy arrays are evaluated a panel at a time, which is considerably faster;
anything else falls back to point-by-point evaluation.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from warpgreen import _kernels
from warpgreen.errors import DegenerateFit, NonConvergent, NonFinite, Unbounded

RealFn = Callable[[float], float]

# 7-point Gauss / 15-point Kronrod pair (QUADPACK qk15 abscissae and weights).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod abscissae (0.949.., 0.741.., 0.405.., 0).
_GAUSS_W[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])

_EPS = np.finfo(float).eps
OVERFLOW_GUARD = 1e300


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_depth: int = 60
    tail_cut_threshold: float = 0.0
    max_intervals: int = 20000

    def __post_init__(self) -> None:
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if self.max_depth < 8:
            raise ValueError("max_depth must be at least 8")
        if self.tail_cut_threshold < 0:
            raise ValueError("tail_cut_threshold must be nonnegative")

    def scaled(self, factor: float) -> "QuadratureConfig":
        return QuadratureConfig(
            self.abs_tol * factor,
            self.rel_tol * factor,
            self.max_depth,
            self.tail_cut_threshold,
            self.max_intervals,
        )


DEFAULT_CONFIG = QuadratureConfig()


@dataclass(frozen=True)
class TailResult:
    value: float
    converged: bool
    error: float = float("nan")
    shells: int = 0


@dataclass(frozen=True)
class SupResult:
    value: float
    argsup: float
    monotone_tail: bool


@dataclass(frozen=True)
class PowerFit:
    exponent: float
    intercept: float
    r_squared: float
    n_points: int


def vectorized(f: RealFn) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap ``f`` so it maps float arrays to float arrays.

    The first call decides whether ``f`` broadcasts over arrays; scalar-only
    callables are mapped element by element from then on.
    """
    if getattr(f, "_wg_vectorized", False):
        return f  # type: ignore[return-value]
    mode: list[str] = []

    def vf(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not mode or mode[0] == "array":
            try:
                with np.errstate(all="ignore"):
                    y = np.asarray(f(x), dtype=float)
                if y.shape == x.shape:
                    if not mode:
                        mode.append("array")
                    return y
                if y.ndim == 0:
                    if not mode:
                        mode.append("array")
                    return np.full(x.shape, float(y))
            except (TypeError, ValueError):
                pass
            if mode:
                mode[0] = "scalar"
            else:
                mode.append("scalar")
        with np.errstate(all="ignore"):
            return np.array([float(f(float(xi))) for xi in x.ravel()]).reshape(x.shape)

    vf._wg_vectorized = True  # type: ignore[attr-defined]
    return vf


def _panel(vf, a: float, b: float) -> tuple[float, float, float]:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    y = vf(mid + half * _NODES)
    if not np.all(np.isfinite(y)):
        bad = float((mid + half * _NODES)[~np.isfinite(y)][0])
        raise NonFinite(f"integrand is not finite at x={bad!r}")
    k = half * float(np.dot(_KRONROD_W, y))
    g = half * float(np.dot(_GAUSS_W, y))
    resabs = abs(half) * float(np.dot(_KRONROD_W, np.abs(y)))
    return k, abs(k - g), resabs


def integrate_with_error(
    f: RealFn, a: float, b: float, cfg: QuadratureConfig | None = None
) -> tuple[float, float]:
    """Globally adaptive Gauss-Kronrod (7/15) quadrature; returns (value, error)."""
    cfg = cfg or DEFAULT_CONFIG
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("integrate needs finite limits; use integrate_tail")
    if a > b:
        raise ValueError(f"need a <= b, got a={a}, b={b}")
    if a == b:
        return 0.0, 0.0
    vf = vectorized(f)
    k, err, resabs = _panel(vf, a, b)
    floor = 50.0 * _EPS * resabs
    # heap entries: (-err, counter, a, b, value, err, floor, depth)
    heap = [(-err, 0, a, b, k, err, floor, 0)]
    total = k
    total_err = err
    settled_err = 0.0
    settled: list[float] = []
    counter = 1
    while True:
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(total))
        if total_err + settled_err <= tol or not heap:
            break
        _, _, lo, hi, val, e, fl, depth = heapq.heappop(heap)
        if e <= fl:
            # roundoff-limited; further splitting cannot improve it
            settled_err += e
            total_err -= e
            settled.append(val)
            continue
        if depth >= cfg.max_depth or counter >= cfg.max_intervals:
            raise NonConvergent(
                f"quadrature on [{a}, {b}] did not reach tolerance "
                f"(error {total_err + settled_err:.3g} > {tol:.3g}) near x={0.5 * (lo + hi)!r}"
            )
        mid = 0.5 * (lo + hi)
        k1, e1, r1 = _panel(vf, lo, mid)
        k2, e2, r2 = _panel(vf, mid, hi)
        total += (k1 + k2) - val
        total_err += (e1 + e2) - e
        heapq.heappush(heap, (-e1, counter, lo, mid, k1, e1, 50.0 * _EPS * r1, depth + 1))
        heapq.heappush(heap, (-e2, counter + 1, mid, hi, k2, e2, 50.0 * _EPS * r2, depth + 1))
        counter += 2
    # resum the leaves to shed accumulated update roundoff
    value = math.fsum([item[4] for item in heap] + settled)
    return value, max(total_err + settled_err, 0.0)


def integrate(f: RealFn, a: float, b: float, cfg: QuadratureConfig | None = None) -> float:
    """Integral of ``f`` over [a, b] to within max(abs_tol, rel_tol*|I|)."""
    return integrate_with_error(f, a, b, cfg)[0]


def integrate_tail(
    f: RealFn,
    a: float,
    cfg: QuadratureConfig | None = None,
    scale: float | None = None,
    max_shells: int = 200,
    min_divergence_shells: int = 12,
) -> TailResult:
    """Improper integral of ``f`` over [a, inf).

    The half-line is cut into dyadic shells ``[a + w(2^k - 1), a + w(2^(k+1) - 1)]``
    (``w = scale`` or ``max(a, 1)``).  Once consecutive shell contributions
    shrink geometrically, the remainder is summed as a geometric series and
    its uncertainty is estimated from the drift of the ratio.  Shells that
    stop shrinking (ratio >= 0.999 over four shells) mean the integral
    diverges; that is reported through ``converged=False``.
    """
    cfg = cfg or DEFAULT_CONFIG
    a = float(a)
    if a < 0 or not math.isfinite(a):
        raise ValueError(f"tail start must be finite and nonnegative, got {a}")
    w = float(scale) if scale else max(a, 1.0)
    shell_cfg = cfg.scaled(0.1)
    contributions: list[float] = []
    ratios: list[float] = []
    lo = a
    for k in range(max_shells):
        hi = a + w * (2.0 ** (k + 1) - 1.0)
        if hi <= lo:
            hi = lo + w * 2.0**k
        s = integrate(f, lo, hi, shell_cfg)
        lo = hi
        contributions.append(s)
        total = math.fsum(contributions)
        if abs(total) > OVERFLOW_GUARD:
            return TailResult(total, False, float("inf"), k + 1)
        if cfg.tail_cut_threshold > 0 and k >= 2:
            probe = vectorized(f)(np.array([hi]))[0]
            if abs(probe) * w * 2.0**k < cfg.tail_cut_threshold and abs(s) < cfg.tail_cut_threshold:
                return TailResult(total, True, abs(s), k + 1)
        if k == 0:
            continue
        prev = contributions[-2]
        if prev == 0.0:
            q = 0.0 if s == 0.0 else math.inf
        else:
            q = abs(s) / abs(prev)
        ratios.append(q)
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(total))
        if k >= 3 and s == 0.0 and prev == 0.0:
            return TailResult(total, True, 0.0, k + 1)
        if k >= 3 and len(ratios) >= 2 and ratios[-1] < 1.0 and ratios[-2] < 1.0:
            q_now, q_prev = ratios[-1], ratios[-2]
            remainder = s * q_now / (1.0 - q_now)
            worst = max(q_now, q_prev)
            drift = abs(s) * abs(q_now - q_prev) / (1.0 - worst) ** 2
            # absolute floor: the shell itself carries quadrature error
            err = drift + 1e-3 * abs(remainder) * (q_now > q_prev) + 1e-2 * abs(s) * _EPS
            if err <= tol:
                value = total + remainder
                return TailResult(value, True, err, k + 1)
        if k + 1 >= min_divergence_shells and len(ratios) >= 4 and all(r >= 0.999 for r in ratios[-4:]):
            return TailResult(total, False, float("inf"), k + 1)
    return TailResult(math.fsum(contributions), False, float("inf"), max_shells)


def _sample_grid(a: float, hi: float, per_decade: int) -> np.ndarray:
    if hi <= a:
        return np.array([a])
    start = min(1e-6, hi * 1e-6)
    if a >= start:
        count = max(65, int(math.ceil(per_decade * math.log10(hi / a))) + 1)
        xs = np.geomspace(a, hi, count)
    else:
        # a = 0 or tiny: a single point below the log-spaced block
        count = max(65, int(math.ceil(per_decade * math.log10(hi / start))) + 1)
        xs = np.concatenate([[a], np.geomspace(start, hi, count)])
    xs[0] = a
    xs[-1] = hi
    return xs


def _saturating_sup(vf, hi: float, y_hi: float, cfg, decades: int = 8) -> SupResult:
    """Sup of a function still increasing at ``hi``: finite only if it saturates.

    Samples one point per decade past the horizon.  Increments shrinking at
    least geometrically (ratio <= 1/2) mean a finite limit, which is summed
    as a geometric series; anything slower is unbounded.
    """
    xs = hi * 10.0 ** np.arange(decades + 1)
    ys = vf(xs)
    ys[0] = y_hi
    if np.any(~np.isfinite(ys)) or np.any(np.abs(ys) > OVERFLOW_GUARD):
        raise Unbounded(f"function grows past the overflow guard beyond r={hi:g}")
    d = np.diff(ys)
    if np.any(d <= 0):
        # turned over past the horizon: an ordinary interior maximum
        j = int(np.argmax(ys))
        lo_x = xs[max(j - 1, 0)]
        hi_x = xs[min(j + 1, xs.size - 1)]
        inner = sup_on(vf, float(lo_x), float(hi_x), cfg)
        return SupResult(inner.value, inner.argsup, False)
    q = d[1:] / d[:-1]
    if np.all(q[-3:] <= 0.5):
        q_last = float(q[-1])
        limit = float(ys[-1]) + float(d[-1]) * q_last / (1.0 - q_last)
        return SupResult(limit, math.inf, False)
    raise Unbounded(f"function still increasing at horizon r={hi:g}")


def sup_on(
    f: RealFn,
    a: float,
    b_or_inf: float = math.inf,
    cfg: QuadratureConfig | None = None,
    horizon: float | None = None,
    samples_per_decade: int = 64,
) -> SupResult:
    """Supremum of ``f`` on [a, b] (or [a, inf)) by log-spaced sampling.

    The best sample is refined by golden-section search between its
    neighbours.  On an infinite interval sampling stops at ``horizon``
    (default ``max(1e4, 100*max(a, 1))``); if ``f`` is still increasing there
    the supremum is declared unbounded, unless the increase saturates to a
    finite limit (reported with ``argsup = inf``).
    """
    a = float(a)
    if a < 0:
        raise ValueError("sup_on needs a >= 0")
    infinite = math.isinf(b_or_inf)
    if infinite:
        hi = float(horizon) if horizon is not None else max(1e4, 100.0 * max(a, 1.0))
    else:
        hi = float(b_or_inf)
        if hi < a:
            raise ValueError("sup_on needs a <= b")
    vf = vectorized(f)
    xs = _sample_grid(a, hi, samples_per_decade)
    ys = vf(xs)
    if np.any(np.isnan(ys)):
        raise NonFinite(f"function is nan at x={float(xs[np.isnan(ys)][0])!r}")
    if np.any(np.abs(ys) > OVERFLOW_GUARD):
        raise Unbounded(f"function exceeds overflow guard at x={float(xs[np.abs(ys) > OVERFLOW_GUARD][0])!r}")
    i = int(np.argmax(ys))
    n = xs.size
    if infinite and n > 1 and i == n - 1 and ys[-1] > ys[-2]:
        return _saturating_sup(vf, hi, float(ys[-1]), cfg)
    best_x, best_y = float(xs[i]), float(ys[i])
    if n > 1:
        lo_i, hi_i = max(i - 1, 0), min(i + 1, n - 1)
        refine = 0 < i < n - 1
        if not refine:
            # endpoint maximum: refine only if the adjacent cell has a bump
            nb = 1 if i == 0 else n - 2
            probe = np.linspace(xs[min(i, nb)], xs[max(i, nb)], 5)[1:-1]
            refine = bool(np.any(vf(probe) > best_y))
        if refine:
            scalar = lambda x: float(vf(np.array([x]))[0])  # noqa: E731
            x_lo, x_hi = float(xs[lo_i]), float(xs[hi_i])
            xtol = 1e-13 * max(1.0, abs(best_x)) + 1e-14 * (x_hi - x_lo)
            gx, gy = _kernels.golden_max(scalar, x_lo, x_hi, xtol, 200)
            if gy > best_y:
                best_x, best_y = float(gx), float(gy)
    tail = ys[i:]
    scale = max(abs(float(best_y)), 1e-300)
    monotone = bool(np.all(np.diff(tail) <= 1e-12 * scale))
    if not math.isfinite(best_y):
        raise Unbounded("supremum is not finite")
    return SupResult(best_y, best_x, monotone)


def fit_power_law(
    terms: Iterable[tuple[float, float]] | None = None,
    *,
    indices: Sequence[float] | None = None,
    values: Sequence[float] | None = None,
) -> PowerFit:
    """Least-squares line through (log m, log t_m); the slope is the exponent."""
    if terms is not None:
        pairs = [(float(m), float(t)) for m, t in terms]
        m = np.array([p[0] for p in pairs])
        t = np.array([p[1] for p in pairs])
    else:
        m = np.asarray(indices, dtype=float)
        t = np.asarray(values, dtype=float)
    if m.size < 4:
        raise DegenerateFit(f"need at least 4 points, got {m.size}")
    if np.any(~np.isfinite(t)) or np.any(t <= 0):
        raise DegenerateFit("all terms must be finite and positive")
    if np.any(m <= 0):
        raise DegenerateFit("indices must be positive")
    if np.ptp(m) == 0:
        raise DegenerateFit("all indices are equal")
    x = np.log(m)
    y = np.log(t)
    xm = x.mean()
    ym = y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((y - (intercept + slope * x)) ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    if ss_tot <= 1e-28 * max(1.0, float(np.sum(y**2))):
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return PowerFit(slope, intercept, r2, int(m.size))
