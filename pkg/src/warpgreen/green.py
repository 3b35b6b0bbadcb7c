"""Minimal positive Green's function about the pole of a model manifold.

On a model manifold the Green's function with pole ``p`` is radial,
``G(r) = g(r) / |S^{n-1}|`` with ``g(r) = int_r^inf phi^{1-n}``.  The kernel
stores ``h(r) = g(r) phi(r)^{n-1}`` rather than ``g``: ``h`` is of moderate
size for every family (``g`` underflows for exponential warps long before
anything interesting happens), and ``log g = log h - (n-1) log phi``.

``log h`` is cached on a log-spaced radial grid and interpolated in ``log r``
by quintic splines through the node values, one spline per smooth piece
(``phi''`` may jump at family knots, and so does ``(log h)''``).  The analytic
slope ``(n-1) phi'/phi - 1/h`` is not used as interpolation data: in
exponential tails it is a difference of two nearly equal large numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline, make_interp_spline

from warpgreen import _kernels
from warpgreen.errors import (
    DegenerateTestFunction,
    LevelOutOfRange,
    NotCartanHadamard,
    ParabolicManifold,
)
from warpgreen.geometry import TABULATED, ModelManifold, OmegaTable, q_of
from warpgreen.numerics import (
    DEFAULT_CONFIG,
    QuadratureConfig,
    TailResult,
    integrate,
    integrate_tail,
)

KERNEL_R_MIN = 1e-3
KERNEL_R_MAX = 1e6
NODES_PER_DECADE = 64
KNOT_REFINE = 8
_KERNEL_CFG = QuadratureConfig(abs_tol=1e-300, rel_tol=1e-13)


def tail_scale(M: ModelManifold, r: float) -> float:
    """First-shell width for tails of phi(r)^{n-1}/phi(t)^{n-1}-like integrands.

    Power-type decay gets shells proportional to ``r`` (exactly geometric for
    pure powers); fast exponential decay gets shells sized to its decay length.
    """
    r = max(float(r), 1e-300)
    dL = float(M.warp.log_derivs(r)[1][0])
    rate = (M.dim - 1) * dL
    if rate * r > 8.0:
        return 1.0 / rate
    return r


def _decaying_integral(fn, a: float, b: float, length: float, cfg: QuadratureConfig) -> float:
    """Integral over [a, b] of a monotone decreasing ``fn`` with decay length ``length``."""
    if length <= 0 or length * 8 >= (b - a):
        return integrate(fn, a, b, cfg)
    parts: list[float] = []
    lo = a
    k = 0
    while lo < b:
        hi = min(b, a + length * (2.0 ** (k + 1) - 1.0))
        piece = integrate(fn, lo, hi, cfg)
        parts.append(piece)
        lo = hi
        k += 1
        total = math.fsum(parts)
        if piece <= 1e-18 * abs(total):
            break
    return math.fsum(parts)


@dataclass
class GreenKernel:
    manifold: ModelManifold
    parabolic: bool
    normalization: float
    r_min: float = KERNEL_R_MIN
    r_max: float = KERNEL_R_MAX
    cfg: QuadratureConfig = DEFAULT_CONFIG
    _x: np.ndarray = field(default=None, repr=False)
    _y: np.ndarray = field(default=None, repr=False)
    _spline: "_PiecewiseSpline" = field(default=None, repr=False)

    # raw pieces ---------------------------------------------------------

    def _require(self) -> None:
        if self.parabolic:
            raise ParabolicManifold(f"{self.manifold.label} is parabolic; no positive Green's function")

    def _L(self, r):
        return self.manifold.warp.log_derivs(r)[0]

    def _direct_h(self, r: float) -> float:
        """h(r) by quadrature, for radii outside the cache."""
        n1 = self.manifold.dim - 1
        warp = self.manifold.warp
        if r == 0.0:
            return 0.0

        def integrand(u):
            with np.errstate(over="ignore", under="ignore"):
                return np.exp(-n1 * warp.log_growth(r, u))

        if r > self.r_max:
            res = integrate_tail(integrand, 0.0, _KERNEL_CFG, scale=tail_scale(self.manifold, r))
            if not res.converged:
                raise ParabolicManifold(f"Green's tail diverges at r={r}")
            return res.value
        # below the cache: connect to the first node
        lo = self.r_min
        head = math.exp(-n1 * float(warp.log_growth(r, lo - r))) * math.exp(float(self._y[0]))
        return head + integrate(integrand, 0.0, lo - r, _KERNEL_CFG)

    # public evaluation --------------------------------------------------

    def h(self, r):
        """g(r) * phi(r)^{n-1}; equals 1/(2 sqrt(rho_green))."""
        self._require()
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r_arr)
        inside = (r_arr >= self.r_min) & (r_arr <= self.r_max)
        if np.any(inside):
            out[inside] = np.exp(self._spline(np.log(r_arr[inside])))
        for idx in np.flatnonzero(~inside):
            out[idx] = self._direct_h(float(r_arr[idx]))
        return float(out[0]) if np.ndim(r) == 0 else out

    def log_g(self, r):
        """log of the unnormalized tail g(r) = int_r^inf phi^{1-n}."""
        L = self._L(r)
        val = np.log(np.atleast_1d(self.h(r))) - (self.manifold.dim - 1) * L
        return float(val[0]) if np.ndim(r) == 0 else val

    def tail(self, r):
        """Unnormalized kernel g(r) = int_r^inf phi(t)^{1-n} dt."""
        val = np.exp(np.atleast_1d(self.log_g(r)))
        return float(val[0]) if np.ndim(r) == 0 else val

    def log_G(self, r):
        return self.log_g(r) + math.log(self.normalization)

    def G(self, r):
        val = np.exp(np.atleast_1d(self.log_G(r)))
        return float(val[0]) if np.ndim(r) == 0 else val

    def log_abs_dG(self, r):
        """log |G'(r)| = -(n-1) log phi(r) - log |S^{n-1}|."""
        self._require()
        val = -(self.manifold.dim - 1) * self._L(r) + math.log(self.normalization)
        return float(val[0]) if np.ndim(r) == 0 else val

    def dG(self, r):
        val = -np.exp(np.atleast_1d(self.log_abs_dG(r)))
        return float(val[0]) if np.ndim(r) == 0 else val

    @property
    def level_range(self) -> tuple[float, float]:
        """Open-closed range (G(r_max), G(r_min)] of levels the kernel can invert."""
        return self.G(self.r_max), self.G(self.r_min)

    def level_radius(self, s: float, rtol: float = 1e-12) -> float:
        """Radius r with G(r) = s, by bisection in log r."""
        self._require()
        if not s > 0:
            raise LevelOutOfRange(f"level must be positive, got {s}")
        log_s = math.log(s)
        lo, hi = math.log(self.r_min), math.log(self.r_max)
        g_lo, g_hi = self.log_G(self.r_min), self.log_G(self.r_max)
        if log_s > g_lo or log_s <= g_hi:
            raise LevelOutOfRange(f"level {s:g} outside ({math.exp(g_hi):g}, {math.exp(g_lo):g}]")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.log_G(math.exp(mid)) > log_s:
                lo = mid
            else:
                hi = mid
            if math.exp(hi) - math.exp(lo) <= rtol * math.exp(lo):
                break
        return math.exp(0.5 * (lo + hi))


class _PiecewiseSpline:
    """Interpolating splines (degree <= 5) on the pieces between breakpoints."""

    def __init__(self, x: np.ndarray, y: np.ndarray, breaks) -> None:
        self.edges = np.concatenate([[x[0]], np.sort(np.asarray(breaks, dtype=float)), [x[-1]]])
        self.pieces = []
        for lo, hi in zip(self.edges[:-1], self.edges[1:]):
            sel = (x >= lo) & (x <= hi)
            k = min(5, int(sel.sum()) - 1)
            if k % 2 == 0:
                k -= 1
            self.pieces.append(make_interp_spline(x[sel], y[sel], k=max(k, 1)))

    def __call__(self, xq):
        xq = np.asarray(xq, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, xq, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(xq)
        for j in np.unique(idx):
            sel = idx == j
            out[sel] = self.pieces[j](xq[sel])
        return out


def _kernel_grid(M: ModelManifold, r_min: float, r_max: float) -> np.ndarray:
    count = int(math.ceil(NODES_PER_DECADE * math.log10(r_max / r_min))) + 1
    grid = np.geomspace(r_min, r_max, count)
    knots = [k for k in M.warp.knot_radii if r_min < k < r_max]
    # pieces end at knots without derivative data; pack nodes there
    step = math.log(10.0) / NODES_PER_DECADE
    fine = np.arange(1, 2 * KNOT_REFINE) * (step / KNOT_REFINE)
    extra = [k * np.exp(sign * fine) for k in knots for sign in (-1.0, 1.0)]
    if M.warp.splice_interval:
        # the blend bends hard for steep tails
        r0, r1 = M.warp.splice_interval
        extra.append(np.geomspace(r0, r1, int(4 * NODES_PER_DECADE * math.log10(r1 / r0)) + 1))
    cand = np.unique(np.concatenate([grid, *extra]))
    cand = cand[(cand > r_min) & (cand < r_max)]
    # drop near-duplicates (they only hurt conditioning); knots always stay
    min_gap = step / (4 * KNOT_REFINE)
    anchors = np.log(np.array(knots + [r_max]))
    keep = [r_min]
    for r in cand:
        lr = math.log(r)
        if lr - math.log(keep[-1]) >= min_gap and np.all(np.abs(anchors - lr) >= min_gap):
            keep.append(float(r))
    keep.append(r_max)
    return np.unique(np.concatenate([keep, knots]))


def build_kernel(
    M: ModelManifold,
    r_min: float = KERNEL_R_MIN,
    r_max: float = KERNEL_R_MAX,
    cfg: QuadratureConfig | None = None,
) -> GreenKernel:
    """Classify parabolicity and, if non-parabolic, cache log h on a log grid."""
    cfg = cfg or DEFAULT_CONFIG
    n1 = M.dim - 1
    warp = M.warp
    norm = 1.0 / M.sphere_area

    def decay(t):
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(-n1 * warp.log_derivs(t)[0])

    probe = integrate_tail(decay, 1.0, cfg, scale=tail_scale(M, 1.0))
    if not probe.converged:
        return GreenKernel(M, True, norm, r_min, r_max, cfg)

    grid = _kernel_grid(M, r_min, r_max)
    L, dL, _ = warp.log_derivs(grid)
    kernel = GreenKernel(M, False, norm, r_min, r_max, cfg)

    top = float(grid[-1])

    def top_integrand(u):
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(-n1 * warp.log_growth(top, u))

    top_tail = integrate_tail(top_integrand, 0.0, _KERNEL_CFG, scale=tail_scale(M, top))
    if not top_tail.converged:
        return GreenKernel(M, True, norm, r_min, r_max, cfg)

    # h_i = h_{i+1} exp(n1 (L_i - L_{i+1})) + int_{r_i}^{r_{i+1}} exp(n1 (L_i - L(t))) dt
    m = grid.size - 1
    decay_factors = np.empty(m)
    increments = np.empty(m)
    for j in range(m):
        i = m - 1 - j  # walk downward from the top node
        lo, hi = float(grid[i]), float(grid[i + 1])
        width = hi - lo
        with np.errstate(under="ignore"):
            decay_factors[j] = math.exp(-n1 * float(warp.log_growth(lo, width)))
        length = 1.0 / (n1 * float(dL[i])) if dL[i] > 0 else width

        def seg(u, lo=lo):
            with np.errstate(over="ignore", under="ignore"):
                return np.exp(-n1 * warp.log_growth(lo, u))

        increments[j] = _decaying_integral(seg, 0.0, width, length, _KERNEL_CFG)
    # seed the recurrence with the top value through a unit first step
    seeded = _kernels.scaled_recurrence(
        np.concatenate([[0.0], decay_factors]), np.concatenate([[top_tail.value], increments])
    )
    h_desc = seeded[1:]
    h = h_desc[::-1]
    logh = np.log(h)
    x = np.log(grid)
    kernel._x = x
    kernel._y = logh
    kernel._spline = _PiecewiseSpline(x, logh, np.log([k for k in warp.knot_radii if r_min < k < r_max]))
    return kernel


# weights ----------------------------------------------------------------


@dataclass(frozen=True)
class WeightFunction:
    kind: str
    eval: Callable = field(repr=False)
    valid_from: float
    gamma: float | None = None
    c_prime: float | None = None

    def __call__(self, r):
        return self.eval(r)

    def scaled(self, factor: float) -> "WeightFunction":
        base = self.eval
        return WeightFunction(
            self.kind,
            lambda r: factor * np.asarray(base(r)),
            self.valid_from,
            self.gamma,
            None if self.c_prime is None else self.c_prime * factor,
        )


def green_weight(K: GreenKernel) -> WeightFunction:
    """rho = |G'|^2 / (4 G^2) = 1 / (4 h^2); the normalization cancels."""
    K._require()

    def rho(r):
        h = K.h(r)
        return 0.25 / (np.asarray(h) ** 2)

    return WeightFunction("green", rho, K.r_min)


def hardy_weight(M: ModelManifold, gamma: float, c_prime: float) -> WeightFunction:
    """Piecewise power weight: C' r^gamma for gamma >= -2, C' r^-2 below."""
    if not c_prime > 0:
        raise ValueError("C' must be positive")
    start = M.warp.splice_interval[1] if M.warp.splice_interval else KERNEL_R_MIN
    if M.warp.kind == TABULATED:
        start = KERNEL_R_MIN
    samples = np.geomspace(max(start, KERNEL_R_MIN), 1e3, 256)
    curv = M.warp.curvature(samples)
    if np.any(curv < -1e-12):
        bad = float(samples[np.argmax(curv < -1e-12)])
        raise NotCartanHadamard(f"phi'' < 0 at r={bad:g} on {M.label}")
    power = float(gamma) if gamma >= -2 else -2.0

    def rho(r):
        return c_prime * np.asarray(r, dtype=float) ** power

    return WeightFunction("hardy", rho, 1.0, float(gamma), float(c_prime))


# identity and estimate checks -------------------------------------------


def flux_identity_check(K: GreenKernel, s: float) -> float:
    """|G'| times the area of the level sphere {G = s}; exactly 1 in theory."""
    r = K.level_radius(s)
    M = K.manifold
    log_area = math.log(M.sphere_area) + (M.dim - 1) * float(K._L(r)[0])
    log_grad = K.log_abs_dG(r)
    grad = math.exp(log_grad)
    area = math.exp(log_area) if log_area < 700 else math.inf
    if grad > 0 and math.isfinite(area):
        return grad * area
    return math.exp(log_grad + log_area)


def log_level_identity_check(
    K: GreenKernel, a: float, b: float, cfg: QuadratureConfig | None = None
) -> tuple[float, float]:
    """(lhs, rhs) for the level-shell integral of |grad G|^2 / G against log(b/a)."""
    if not (0 < a < b):
        raise LevelOutOfRange(f"need 0 < a < b, got a={a}, b={b}")
    cfg = cfg or QuadratureConfig(abs_tol=1e-14, rel_tol=1e-12)
    r_a = K.level_radius(a)
    r_b = K.level_radius(b)
    M = K.manifold
    n1 = M.dim - 1
    log_area = math.log(M.sphere_area)

    def integrand(r):
        L = K._L(r)
        val = log_area + 2.0 * K.log_abs_dG(r) - K.log_G(r) + n1 * L
        return np.exp(val)

    lhs = integrate(integrand, r_b, r_a, cfg)
    return lhs, math.log(b / a)


def gradient_bound_ratio(K: GreenKernel, r: float, annulus_ratio: float = 0.25) -> float:
    """|G'| / (sqrt(Q_{r/4}(r)) G); bounded by a dimensional constant in theory."""
    q = q_of(K.manifold, r, annulus_ratio * r)
    return math.exp(K.log_abs_dG(r) - K.log_G(r)) / math.sqrt(q)


def sandwich_fit(K: GreenKernel, table: OmegaTable, r_samples) -> tuple[float, float]:
    """Smallest (B, A) with A^-1 exp(-B w) <= G <= A exp(B w) on the samples."""
    K._require()
    a = table.base_a
    log_Ga = K.log_G(a)
    best = 0.0
    for r in np.asarray(r_samples, dtype=float):
        w = table.omega(float(r))
        if w <= 0:
            continue
        best = max(best, abs(K.log_G(float(r)) - log_Ga) / w)
    return best, math.exp(abs(log_Ga))


def weighted_tail_energy(
    K: GreenKernel, rho: WeightFunction, R: float, cfg: QuadratureConfig | None = None
) -> TailResult:
    """Tail of int rho G^2 dV outside the ball of radius R."""
    K._require()
    M = K.manifold
    n1 = M.dim - 1
    log_area = math.log(M.sphere_area)

    def integrand(r):
        log_mass = 2.0 * np.asarray(K.log_G(r)) + log_area + n1 * K._L(r)
        with np.errstate(under="ignore", over="ignore"):
            return np.asarray(rho(r)) * np.exp(log_mass)

    return integrate_tail(integrand, R, cfg, scale=tail_scale(M, R))


# weighted Poincare spot check -------------------------------------------


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t)


def near_optimizer(M: ModelManifold, lo: float, hi: float):
    """Truncated r^{-(n-2)/2} with C^1 ramps of unit length in log r.

    Returns (v, v') callables and the breakpoints of the construction.
    """
    power = -(M.dim - 2) / 2.0
    s0, s1 = math.log(lo), math.log(hi)
    ramp = min(1.0, 0.25 * (s1 - s0))

    def chi(r):
        s = np.log(r)
        up, dup = _smoothstep((s - s0) / ramp)
        down, ddown = _smoothstep((s1 - s) / ramp)
        return up * down, (dup * down - up * ddown) / ramp

    def v(r):
        r = np.asarray(r, dtype=float)
        c, _ = chi(r)
        return r**power * c

    def dv(r):
        r = np.asarray(r, dtype=float)
        c, dc_ds = chi(r)
        return r ** (power - 1.0) * (power * c + dc_ds)

    breaks = [lo, math.exp(s0 + ramp), math.exp(s1 - ramp), hi]
    return v, dv, breaks


def _random_bump(rng: np.random.Generator, lo: float, hi: float):
    s_lo, s_hi = math.log(lo), math.log(hi)
    ends = np.sort(rng.uniform(s_lo, s_hi, size=2))
    if ends[1] - ends[0] < 0.05 * (s_hi - s_lo):
        ends = np.array([s_lo, s_hi])
    interior = int(rng.integers(4, 9))
    knots_s = np.sort(rng.uniform(ends[0], ends[1], size=interior))
    knots = np.exp(np.concatenate([[ends[0]], knots_s, [ends[1]]]))
    knots = np.unique(knots)
    k = knots.size
    vals = np.concatenate([[0.0], rng.uniform(-1.0, 1.0, size=k - 2), [0.0]])
    span = knots[-1] - knots[0]
    slopes = np.concatenate([[0.0], rng.uniform(-4.0, 4.0, size=k - 2) / span, [0.0]])
    spline = CubicHermiteSpline(knots, vals, slopes)
    return (lambda r: spline(r)), (lambda r: spline(r, 1)), list(knots)


def _rayleigh(M: ModelManifold, rho: WeightFunction, v, dv, breaks, cfg) -> float:
    n1 = M.dim - 1
    L_ref = float(M.warp.log_derivs(breaks[-1])[0][0])

    def density(r):
        with np.errstate(under="ignore"):
            return np.exp(n1 * (M.warp.log_derivs(r)[0] - L_ref))

    num = math.fsum(
        integrate(lambda r: np.asarray(rho(r)) * np.asarray(v(r)) ** 2 * density(r), lo, hi, cfg)
        for lo, hi in zip(breaks[:-1], breaks[1:])
    )
    den = math.fsum(
        integrate(lambda r: np.asarray(dv(r)) ** 2 * density(r), lo, hi, cfg)
        for lo, hi in zip(breaks[:-1], breaks[1:])
    )
    if den <= 0:
        raise DegenerateTestFunction("test function has zero gradient energy")
    return num / den


def poincare_ratios(
    M: ModelManifold,
    rho: WeightFunction,
    trials: int,
    seed: int = 0,
    r_max: float = 1e3,
    margin: float = 0.05,
    include_near_optimizer: bool = True,
    cfg: QuadratureConfig | None = None,
) -> np.ndarray:
    """Rayleigh ratios int rho v^2 / int |v'|^2 over seeded radial bumps.

    With ``include_near_optimizer`` the first entry uses the truncated
    ``r^{-(n-2)/2}`` profile, which nearly saturates the flat Hardy constant.
    """
    cfg = cfg or QuadratureConfig(abs_tol=1e-12, rel_tol=1e-9)
    lo = rho.valid_from + margin
    rng = np.random.default_rng(seed)
    ratios = []
    if include_near_optimizer:
        v, dv, breaks = near_optimizer(M, lo, r_max)
        ratios.append(_rayleigh(M, rho, v, dv, breaks, cfg))
    for _ in range(max(trials - len(ratios), 0)):
        v, dv, breaks = _random_bump(rng, lo, r_max)
        ratios.append(_rayleigh(M, rho, v, dv, breaks, cfg))
    return np.array(ratios)


def poincare_spot_check(
    M: ModelManifold,
    rho: WeightFunction,
    trials: int,
    seed: int = 0,
    r_max: float = 1e3,
    include_near_optimizer: bool = True,
) -> float:
    """Worst Rayleigh ratio; the inequality holds if this is at most 1 (+ slack)."""
    return float(np.max(poincare_ratios(M, rho, trials, seed, r_max, include_near_optimizer=include_near_optimizer)))
