"""Rotationally symmetric model manifolds and their curvature rate function.

A model manifold is ``[0, inf) x S^{n-1}`` with metric ``dr^2 + phi(r)^2 dtheta^2``.
Everything here is radial, so each quantity is a function of ``r`` alone.

Warping functions are handled in log space (``L = log phi``) so that
exponential profiles such as ``exp(B r^2)`` stay usable far past the point
where ``phi`` itself overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from warpgreen import _kernels
from warpgreen.errors import BelowAnchor, InvalidAnnulus, InvalidManifold, NegativeRadius
from warpgreen.numerics import DEFAULT_CONFIG, QuadratureConfig, integrate

EUCLIDEAN = "euclidean"
HYPERBOLIC = "hyperbolic"
POWER_EXP = "power_exp"
POWER_LAW = "power_law"
LINEAR_TAIL = "linear_tail"
TABULATED = "tabulated"

KINDS = (EUCLIDEAN, HYPERBOLIC, POWER_EXP, POWER_LAW, LINEAR_TAIL, TABULATED)
SPLICE_INTERVAL = (1.0, 2.0)
KAPPA_TINY = 1e-14
ANNULUS_RATIO = 0.25


def _log_sinh(r):
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        small = np.log(np.sinh(np.minimum(r, 20.0)))
    big = r + np.log1p(-np.exp(-2.0 * r)) - math.log(2.0)
    return np.where(r < 20.0, small, big)


@dataclass(frozen=True)
class WarpingFamily:
    """A warping profile ``phi`` in the class phi(0)=0, phi'(0)=1, phi>0.

    Build instances with the classmethods.  Families whose closed form only
    describes the tail (``power_exp``, ``power_law``, ``linear_tail``) are
    spliced: ``phi(r) = r`` on ``[0, r0]``, the tail formula (rescaled so that
    ``phi(r1) = r1``) on ``[r1, inf)``, and a cubic Hermite blend of
    ``log phi`` in between.
    """

    kind: str
    params: tuple[tuple[str, float], ...] = ()
    splice_interval: tuple[float, float] | None = None
    knots: tuple[tuple[float, float, float, float], ...] = ()
    _blend: tuple[float, ...] = field(default=(), repr=False, compare=False)
    _spline: object = field(default=None, repr=False, compare=False)

    # construction ------------------------------------------------------

    @classmethod
    def euclidean(cls) -> "WarpingFamily":
        return cls(EUCLIDEAN)

    @classmethod
    def hyperbolic(cls) -> "WarpingFamily":
        return cls(HYPERBOLIC)

    @classmethod
    def power_exp(cls, B: float, gamma: float, splice=SPLICE_INTERVAL) -> "WarpingFamily":
        if not B > 0:
            raise InvalidManifold("power_exp needs B > 0")
        if not gamma > -2:
            raise InvalidManifold("power_exp needs gamma > -2")
        return cls._spliced(POWER_EXP, (("B", float(B)), ("gamma", float(gamma))), splice)

    @classmethod
    def power_law(cls, delta: float, splice=SPLICE_INTERVAL) -> "WarpingFamily":
        if not delta > 1:
            raise InvalidManifold("power_law needs delta > 1")
        return cls._spliced(POWER_LAW, (("delta", float(delta)),), splice)

    @classmethod
    def linear_tail(cls, splice=SPLICE_INTERVAL) -> "WarpingFamily":
        return cls._spliced(LINEAR_TAIL, (), splice)

    @classmethod
    def tabulated(cls, knots: Sequence[Sequence[float]]) -> "WarpingFamily":
        rows = tuple(tuple(float(v) for v in row) for row in knots)
        if len(rows) < 3 or any(len(row) != 4 for row in rows):
            raise InvalidManifold("tabulated family needs >= 3 knots of (r, phi, dphi, d2phi)")
        r = np.array([row[0] for row in rows])
        phi = np.array([row[1] for row in rows])
        dphi = np.array([row[2] for row in rows])
        if np.any(np.diff(r) <= 0):
            raise InvalidManifold("tabulated knots must have strictly increasing r")
        if r[0] != 0.0 or phi[0] != 0.0 or abs(dphi[0] - 1.0) > 1e-12:
            raise InvalidManifold("tabulated family must start with phi(0)=0, phi'(0)=1")
        if np.any(phi[1:] <= 0):
            raise InvalidManifold("tabulated phi must be positive for r > 0")
        if np.any(dphi < 0):
            raise InvalidManifold("tabulated phi must be nondecreasing")
        spline = CubicHermiteSpline(r, phi, dphi, extrapolate=False)
        fam = cls(TABULATED, knots=rows)
        object.__setattr__(fam, "_spline", spline)
        xs = np.linspace(0.0, r[-1], 4096)[1:]
        if np.any(spline(xs) <= 0):
            raise InvalidManifold("tabulated interpolant is not positive on (0, r_max]")
        return fam

    @classmethod
    def _spliced(cls, kind, params, splice) -> "WarpingFamily":
        r0, r1 = (float(splice[0]), float(splice[1]))
        if not 0 < r0 < r1:
            raise InvalidManifold("splice interval must satisfy 0 < r0 < r1")
        fam = cls(kind, params, (r0, r1))
        lf, dlf, _ = fam._outer_raw(np.array([r1]))
        log_c = math.log(r1) - float(lf[0])
        # Hermite data for L = log phi on [r0, r1]
        blend = (r0, r1, math.log(r0), 1.0 / r0, math.log(r1), float(dlf[0]), log_c)
        object.__setattr__(fam, "_blend", blend)
        return fam

    @property
    def param(self) -> dict[str, float]:
        return dict(self.params)

    @property
    def label(self) -> str:
        if not self.params:
            return self.kind
        inner = ", ".join(f"{k}={v:g}" for k, v in self.params)
        return f"{self.kind}({inner})"

    @property
    def knot_radii(self) -> tuple[float, ...]:
        """Radii where the second derivative may jump."""
        if self.splice_interval:
            return self.splice_interval
        if self.kind == TABULATED:
            return tuple(row[0] for row in self.knots[1:])
        return ()

    # tail formulas -----------------------------------------------------

    def _outer_raw(self, r: np.ndarray):
        """(log F, (log F)', (log F)'') for the unscaled tail formula."""
        p = self.param
        with np.errstate(divide="ignore"):
            if self.kind == POWER_EXP:
                B, g = p["B"], p["gamma"]
                e = 1.0 + g / 2.0
                return B * r**e, B * e * r ** (e - 1.0), B * e * (e - 1.0) * r ** (e - 2.0)
            if self.kind == POWER_LAW:
                d = p["delta"]
                return d * np.log(r), d / r, -d / r**2
            if self.kind == LINEAR_TAIL:
                return np.log(r), 1.0 / r, -1.0 / r**2
        raise AssertionError(self.kind)

    def _spliced_log(self, r: np.ndarray):
        r0, r1, l0, d0, l1, d1, log_c = self._blend
        width = r1 - r0
        with np.errstate(divide="ignore"):
            L = np.log(r)
            dL = 1.0 / r
            ddL = -1.0 / r**2
        mid = (r > r0) & (r < r1)
        if np.any(mid):
            t = (r[mid] - r0) / width
            t2, t3 = t * t, t * t * t
            h00, h10, h01, h11 = 2 * t3 - 3 * t2 + 1, t3 - 2 * t2 + t, -2 * t3 + 3 * t2, t3 - t2
            g00, g10, g01, g11 = 6 * t2 - 6 * t, 3 * t2 - 4 * t + 1, -6 * t2 + 6 * t, 3 * t2 - 2 * t
            s00, s10, s01, s11 = 12 * t - 6, 6 * t - 4, -12 * t + 6, 6 * t - 2
            m0, m1 = d0 * width, d1 * width
            L[mid] = h00 * l0 + h10 * m0 + h01 * l1 + h11 * m1
            dL[mid] = (g00 * l0 + g10 * m0 + g01 * l1 + g11 * m1) / width
            ddL[mid] = (s00 * l0 + s10 * m0 + s01 * l1 + s11 * m1) / width**2
        out = r >= r1
        if np.any(out):
            lf, dlf, ddlf = self._outer_raw(r[out])
            L[out] = lf + log_c
            dL[out] = dlf
            ddL[out] = ddlf
        return L, dL, ddL

    # evaluation --------------------------------------------------------

    def log_derivs(self, r):
        """Return (log phi, phi'/phi, phi''/phi) as float arrays."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0):
            raise NegativeRadius(f"radius must be nonnegative, got {float(r.min())}")
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == EUCLIDEAN:
                return np.log(r), 1.0 / r, np.zeros_like(r)
            if self.kind == HYPERBOLIC:
                return _log_sinh(r), 1.0 / np.tanh(r), np.ones_like(r)
            if self.kind == TABULATED:
                phi, dphi, ddphi = self._tabulated(r)
                return np.log(phi), dphi / phi, ddphi / phi
            L, dL, ddL = self._spliced_log(r)
            return L, dL, ddL + dL * dL

    def _tabulated(self, r: np.ndarray):
        spline = self._spline
        r_last, phi_last, dphi_last = self.knots[-1][0], self.knots[-1][1], self.knots[-1][2]
        inside = r <= r_last
        phi = np.empty_like(r)
        dphi = np.empty_like(r)
        ddphi = np.zeros_like(r)
        if np.any(inside):
            phi[inside] = spline(r[inside])
            dphi[inside] = spline(r[inside], 1)
            ddphi[inside] = spline(r[inside], 2)
        out = ~inside
        phi[out] = phi_last + dphi_last * (r[out] - r_last)
        dphi[out] = dphi_last
        return phi, dphi, ddphi

    def evaluate(self, r):
        """Return (phi, phi', phi'') as arrays."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0):
            raise NegativeRadius(f"radius must be nonnegative, got {float(r.min())}")
        if self.kind == EUCLIDEAN:
            return r.copy(), np.ones_like(r), np.zeros_like(r)
        if self.kind == HYPERBOLIC:
            return np.sinh(r), np.cosh(r), np.sinh(r)
        if self.kind == TABULATED:
            return self._tabulated(r)
        L, dL, curv = self.log_derivs(r)
        with np.errstate(over="ignore", invalid="ignore"):
            phi = np.exp(L)
            dphi = dL * phi
            ddphi = curv * phi
        r0 = self.splice_interval[0]
        inner = r <= r0
        phi[inner] = r[inner]
        dphi[inner] = 1.0
        ddphi[inner] = 0.0
        return phi, dphi, ddphi

    def curvature(self, r):
        """phi''/phi, vectorised."""
        return self.log_derivs(r)[2]

    def log_phi(self, r):
        return self.log_derivs(r)[0]

    def log_growth(self, r: float, u):
        """log phi(r + u) - log phi(r) for offsets ``u >= 0``.

        Closed forms avoid the cancellation of subtracting two large logs,
        and working with the offset keeps full precision when ``r`` is huge.
        """
        r = float(r)
        u = np.asarray(u, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            x = u / r
            if self.kind == EUCLIDEAN:
                return np.log1p(x)
            if self.kind == HYPERBOLIC and r >= 20.0:
                return u + np.log1p(-np.exp(-2.0 * (r + u))) - np.log1p(-math.exp(-2.0 * r))
            if self.splice_interval and r >= self.splice_interval[1]:
                p = self.param
                if self.kind == POWER_EXP:
                    e = 1.0 + p["gamma"] / 2.0
                    return p["B"] * r**e * np.expm1(e * np.log1p(x))
                if self.kind == POWER_LAW:
                    return p["delta"] * np.log1p(x)
                return np.log1p(x)
        base = float(self.log_derivs(r)[0][0])
        return self.log_derivs(r + np.atleast_1d(u))[0].reshape(np.shape(u)) - base


@dataclass(frozen=True)
class ModelManifold:
    dim: int
    warp: WarpingFamily

    def __post_init__(self) -> None:
        if int(self.dim) != self.dim or self.dim < 3:
            raise InvalidManifold(f"dimension must be an integer >= 3, got {self.dim}")

    @property
    def sphere_area(self) -> float:
        n = self.dim
        return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)

    @property
    def label(self) -> str:
        return f"{self.warp.label}, n={self.dim}"


def _scalar_or_array(x, like):
    return float(x[0]) if np.ndim(like) == 0 else x


def warp_eval(M: ModelManifold, r: float) -> tuple[float, float, float]:
    if r < 0:
        raise NegativeRadius(f"radius must be nonnegative, got {r}")
    phi, dphi, ddphi = M.warp.evaluate(r)
    return float(phi[0]), float(dphi[0]), float(ddphi[0])


def ricci_radial(M: ModelManifold, r):
    """Ric(dr, dr) = -(n-1) phi''/phi."""
    if np.any(np.asarray(r) < 0):
        raise NegativeRadius(f"radius must be nonnegative, got {r}")
    val = -(M.dim - 1) * M.warp.curvature(r)
    return _scalar_or_array(val, r)


_ANNULUS_SAMPLES = 65
_LEFT = 1.0 - 4.0 * np.finfo(float).eps


def _piece_bracket(a: float, b: float, x: float, knots) -> tuple[float, float]:
    """Shrink [a, b] around x so it does not straddle a curvature jump."""
    for k in knots:
        if a < k <= x:
            a = k
        elif x < k < b:
            b = k * _LEFT
    return a, b


def annulus_sup(warp: "WarpingFamily", lo, hi) -> np.ndarray:
    """sup of phi''/phi on each [lo_i, hi_i], vectorized over intervals.

    Samples are uniform inside each interval plus both one-sided values at
    every knot it contains (the sup of a jump is its larger side).  An
    interior best sample is refined by golden section within its smooth piece.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    t = np.linspace(0.0, 1.0, _ANNULUS_SAMPLES)
    X = lo[:, None] + (hi - lo)[:, None] * t
    knots = [k for k in warp.knot_radii if k > 0]
    if knots:
        ks = np.array(knots)
        extra = np.concatenate([ks * _LEFT, ks])
        X = np.concatenate([X, np.clip(extra[None, :], lo[:, None], hi[:, None])], axis=1)
    Y = np.asarray(warp.curvature(X.ravel()), dtype=float).reshape(X.shape)
    if np.any(np.isnan(Y)):
        raise ValueError("curvature is nan inside an annulus")
    out = Y.max(axis=1)
    S = _ANNULUS_SAMPLES
    curv = lambda x: float(np.asarray(warp.curvature(x)).ravel()[0])  # noqa: E731
    for row in range(X.shape[0]):
        j = int(np.argmax(Y[row, :S]))
        if Y[row, j] < out[row]:
            continue  # a knot side wins
        xs = X[row, :S]
        # a bump whose lift over its neighbours is at roundoff level is noise
        noise = 1e-14 * max(1.0, abs(Y[row, j]))
        floor = Y[row, j] + noise
        if 0 < j < S - 1:
            if Y[row, j] - max(Y[row, j - 1], Y[row, j + 1]) <= noise:
                continue
            cell = (xs[j - 1], xs[j + 1])
        else:
            nb = 1 if j == 0 else S - 2
            a, b = sorted((xs[j], xs[nb]))
            probe = np.linspace(a, b, 5)[1:-1]
            if not np.any(np.asarray(warp.curvature(probe)) > floor):
                continue
            cell = (a, b)
        a, b = _piece_bracket(float(cell[0]), float(cell[1]), float(xs[j]), knots)
        if b <= a:
            continue
        _, gy = _kernels.golden_max(curv, a, b, 1e-13 * max(1.0, b), 200)
        out[row] = max(out[row], gy)
    return out


def k_sup(M: ModelManifold, r: float, R: float, cfg: QuadratureConfig | None = None) -> float:
    """Supremum of phi''/phi over the annulus [r - R, r + R], clamped at 0."""
    if not (R > 0 and r > R):
        raise InvalidAnnulus(f"need r > R > 0, got r={r}, R={R}")
    return max(float(annulus_sup(M.warp, r - R, r + R)[0]), 0.0)


def i_from_k(K: float, R: float) -> float:
    if K < KAPPA_TINY:
        return 2.0 / R
    sk = math.sqrt(K)
    return sk / math.tanh(sk * R / 2.0)


def i_of(M: ModelManifold, r: float, R: float, cfg: QuadratureConfig | None = None) -> float:
    return i_from_k(k_sup(M, r, R, cfg), R)


def q_from_k(K: float, R: float) -> float:
    return max(K, i_from_k(K, R) / R, 1.0 / R**2)


def q_of(M: ModelManifold, r: float, R: float, cfg: QuadratureConfig | None = None) -> float:
    """max{K_R, I_R / R, 1 / R^2} on the annulus of half-width R around r."""
    return q_from_k(k_sup(M, r, R, cfg), R)


def sqrt_q(M: ModelManifold, s, annulus_ratio: float = ANNULUS_RATIO):
    """sqrt(Q_{ratio*s}(s)); the integrand of the rate function."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    R = annulus_ratio * s_arr
    K = np.maximum(annulus_sup(M.warp, s_arr - R, s_arr + R), 0.0)
    sk = np.sqrt(K)
    with np.errstate(divide="ignore", invalid="ignore"):
        coth_form = sk / np.tanh(sk * R / 2.0)
    I = np.where(K < KAPPA_TINY, 2.0 / R, coth_form)
    Q = np.maximum(np.maximum(K, I / R), 1.0 / R**2)
    return _scalar_or_array(np.sqrt(Q), s)


def _jump_radii(warp: "WarpingFamily", annulus_ratio: float) -> list[float]:
    """Where an annulus edge crosses a knot; sqrt_q may jump there."""
    out = []
    for k in warp.knot_radii:
        out += [k / (1.0 - annulus_ratio), k / (1.0 + annulus_ratio)]
    return sorted(out)


def _integrate_split(fn, a: float, b: float, breaks, cfg) -> float:
    inner = [x for x in breaks if a < x < b]
    pts = [a] + inner + [b]
    return math.fsum(integrate(fn, lo, hi, cfg) for lo, hi in zip(pts[:-1], pts[1:]))


@dataclass(frozen=True)
class OmegaTable:
    """Cumulative values of the rate function on an increasing grid."""

    manifold: ModelManifold
    base_a: float
    grid: np.ndarray
    cumulative: np.ndarray
    integrand_cache: np.ndarray
    annulus_ratio: float = ANNULUS_RATIO
    cfg: QuadratureConfig = DEFAULT_CONFIG

    def integrand(self, s):
        return sqrt_q(self.manifold, s, self.annulus_ratio)

    def omega(self, r: float) -> float:
        r = float(r)
        if r < self.base_a:
            raise BelowAnchor(f"r={r} lies below the anchor a={self.base_a}")
        i = int(np.searchsorted(self.grid, r, side="right")) - 1
        if self.grid[i] == r:
            return float(self.cumulative[i])
        breaks = _jump_radii(self.manifold.warp, self.annulus_ratio)
        return float(self.cumulative[i]) + _integrate_split(
            self.integrand, float(self.grid[i]), r, breaks, self.cfg
        )

    def increment(self, m: float) -> float:
        return self.omega(m + 1.0) - self.omega(m)


def build_omega_table(
    M: ModelManifold,
    base_a: float = 1.0,
    r_max: float = 600.0,
    annulus_ratio: float = ANNULUS_RATIO,
    cfg: QuadratureConfig | None = None,
) -> OmegaTable:
    """Tabulate the rate function on ``base_a`` and the integers up to ``r_max``."""
    cfg = cfg or DEFAULT_CONFIG
    if not base_a > 0:
        raise ValueError("base_a must be positive")
    start = math.floor(base_a) + 1.0
    grid = np.concatenate([[base_a], np.arange(start, max(r_max, start) + 0.5)])
    integrand = lambda s: sqrt_q(M, s, annulus_ratio)  # noqa: E731
    breaks = _jump_radii(M.warp, annulus_ratio)
    pieces = [
        _integrate_split(integrand, float(lo), float(hi), breaks, cfg)
        for lo, hi in zip(grid[:-1], grid[1:])
    ]
    cumulative = np.concatenate([[0.0], np.cumsum(pieces)])
    cache = np.asarray(sqrt_q(M, grid, annulus_ratio), dtype=float)
    return OmegaTable(M, float(base_a), grid, cumulative, cache, annulus_ratio, cfg)


def omega(M: ModelManifold, table: OmegaTable, r: float) -> float:
    if table.manifold != M:
        raise ValueError("omega table was built for a different manifold")
    return table.omega(r)


def omega_increment(M: ModelManifold, table: OmegaTable, m: float) -> float:
    if table.manifold != M:
        raise ValueError("omega table was built for a different manifold")
    return table.increment(m)


def volume_ball(M: ModelManifold, R: float, cfg: QuadratureConfig | None = None) -> float:
    if R < 0:
        raise NegativeRadius(f"radius must be nonnegative, got {R}")
    n = M.dim

    def density(r):
        L = M.warp.log_derivs(r)[0]
        with np.errstate(over="ignore"):
            return np.exp((n - 1) * L)

    return M.sphere_area * integrate(density, 0.0, R, cfg)
