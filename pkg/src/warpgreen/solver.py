"""Radial Poisson solver on model manifolds and the sharpness experiments.

The contract is ``Delta u = +f`` with the radial Laplacian
``u'' + (n-1) (phi'/phi) u'``.  Integrating once from the pole gives

    u'(r) = phi(r)^{1-n} int_0^r f phi^{n-1},

which is evaluated cell by cell with a scaled recurrence (only ratios of
``phi^{n-1}`` appear, so nothing overflows).  ``u`` follows by Hermite
(endpoint-corrected trapezoid) cumulative integration of ``u'``.

Decaying solutions exist exactly when ``int_0^inf h(r) f(r) dr`` converges,
with ``h = phi^{n-1} int_r^inf phi^{1-n}``; that integral equals ``-u(0)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from warpgreen import _kernels
from warpgreen.criterion import SourceFunction, model_threshold
from warpgreen.errors import GridTooCoarse, ParabolicManifold, TailDivergence
from warpgreen.geometry import (
    HYPERBOLIC,
    POWER_EXP,
    ModelManifold,
    WarpingFamily,
)
from warpgreen.green import GreenKernel, build_kernel
from warpgreen.numerics import TailResult, integrate_tail

VANISH_AT_INFINITY = "VanishAtInfinity"
ZERO_AT_ORIGIN = "ZeroAtOrigin"
SIGN_CONVENTION = "Delta u = +f"

DEFAULT_R_MAX = 50.0
EXP_R_MAX = 30.0
MIN_INTERIOR_NODES = 64

# 5-point Gauss-Legendre on [-1, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class RadialSolution:
    grid: np.ndarray
    u: np.ndarray
    u_prime: np.ndarray
    normalization: str
    residual_max: float
    residual: np.ndarray = field(repr=False)
    h: float = 0.0
    increments: np.ndarray | None = field(default=None, repr=False)
    sign_convention: str = SIGN_CONVENTION

    def at(self, r: float) -> float:
        return float(np.interp(r, self.grid, self.u))


def default_r_max(M: ModelManifold) -> float:
    """Exponential-volume families stop earlier to keep the grid meaningful."""
    return EXP_R_MAX if M.warp.kind in (HYPERBOLIC, POWER_EXP) else DEFAULT_R_MAX


def _grid(r_max: float, h: float) -> tuple[np.ndarray, float]:
    if not (r_max > 0 and h > 0):
        raise ValueError(f"need r_max > 0 and h > 0, got r_max={r_max}, h={h}")
    cells = max(int(round(r_max / h)), 1)
    return np.linspace(0.0, r_max, cells + 1), r_max / cells


def _flux_derivative(M: ModelManifold, f: SourceFunction, grid: np.ndarray) -> np.ndarray:
    """u'(r_i) = phi(r_i)^{1-n} int_0^{r_i} f phi^{n-1}."""
    n1 = M.dim - 1
    warp = M.warp
    lo, hi = grid[:-1], grid[1:]
    half = 0.5 * (hi - lo)
    t = (lo + hi)[:, None] * 0.5 + half[:, None] * _GL_X[None, :]
    L_t = warp.log_phi(t.ravel()).reshape(t.shape)
    L_g = warp.log_phi(grid)
    with np.errstate(under="ignore"):
        weights = np.exp(n1 * (L_t - L_g[1:, None]))
        incr = half * np.sum(_GL_W[None, :] * f(t) * weights, axis=1)
        decay = np.exp(n1 * (L_g[:-1] - L_g[1:]))
    decay[0] = 0.0  # phi(0) = 0
    return _kernels.scaled_recurrence(decay, incr)


def _second_derivative(M: ModelManifold, f_vals: np.ndarray, grid: np.ndarray, up: np.ndarray):
    n1 = M.dim - 1
    upp = np.empty_like(up)
    dL = M.warp.log_derivs(grid[1:])[1]
    upp[1:] = f_vals[1:] - n1 * dL * up[1:]
    upp[0] = f_vals[0] / M.dim  # regular pole: u'(r) ~ f(0) r / n
    return upp


def solve_radial(
    M: ModelManifold,
    f: SourceFunction,
    r_max: float | None = None,
    h: float | None = None,
    normalization: str = VANISH_AT_INFINITY,
    kernel: GreenKernel | None = None,
) -> RadialSolution:
    """Radial solution of Delta u = f on [0, r_max] with uniform spacing h."""
    if normalization not in (VANISH_AT_INFINITY, ZERO_AT_ORIGIN):
        raise ValueError(f"unknown normalization {normalization!r}")
    r_max = float(r_max) if r_max is not None else default_r_max(M)
    h = float(h) if h is not None else 1e-3 * r_max
    grid, h = _grid(r_max, h)
    f_vals = np.asarray(f(grid), dtype=float)
    up = _flux_derivative(M, f, grid)
    upp = _second_derivative(M, f_vals, grid, up)
    steps = 0.5 * h * (up[:-1] + up[1:]) + h * h / 12.0 * (upp[:-1] - upp[1:])
    u = _kernels.compensated_cumsum(steps)
    if normalization == VANISH_AT_INFINITY:
        K = kernel or build_kernel(M)
        if K.parabolic:
            raise TailDivergence(f"{M.label} is parabolic; no solution vanishes at infinity")
        h_top = K.h(r_max)
        rest = integrate_tail(lambda r: np.asarray(K.h(r)) * f(r), r_max)
        if not rest.converged:
            raise TailDivergence(
                f"int h f diverges for f={f.label} on {M.label}; no decaying solution"
            )
        u = u + (-h_top * up[-1] - rest.value - u[-1])
    residual = _fd_residual(M, grid, steps, f_vals, h)
    res_max = _interior_max(residual)
    return RadialSolution(grid, u, up, normalization, res_max, residual, h, steps)


def _fd_residual(M: ModelManifold, grid, du, f_vals, h) -> np.ndarray:
    coef = np.zeros_like(grid)
    coef[1:] = (M.dim - 1) * M.warp.log_derivs(grid[1:])[1]
    res = np.asarray(_kernels.fd_residual(du, coef, f_vals, h), dtype=float)
    res[:2] = np.nan  # the pole and its neighbour are excluded
    return res


def _interior_max(residual: np.ndarray) -> float:
    vals = np.abs(residual[np.isfinite(residual)])
    return float(vals.max()) if vals.size else math.nan


def residual_check(
    M: ModelManifold, sol: RadialSolution, f: SourceFunction, r_from: float | None = None
) -> float:
    """Max |central-difference Laplacian of u - f| over interior nodes i >= 2.

    The differences u_{i+1} - u_i are taken from the stored integration
    increments when available (same numbers, without cancellation).
    ``r_from`` further restricts the maximum to nodes with r >= r_from.
    Near the pole the (n-1)/r coefficient makes the residual O(h) unless
    f is even in r there.
    """
    grid = sol.grid
    if grid.size - 3 < MIN_INTERIOR_NODES:
        raise GridTooCoarse(f"need at least {MIN_INTERIOR_NODES} interior nodes, got {grid.size - 3}")
    spacing = np.diff(grid)
    h = float(spacing.mean())
    if np.ptp(spacing) > 1e-9 * h:
        raise ValueError("residual_check needs a uniform grid")
    f_vals = np.asarray(f(grid), dtype=float)
    du = sol.increments if sol.increments is not None else np.diff(sol.u)
    res = _fd_residual(M, grid, du, f_vals, h)
    if r_from is not None:
        res = np.where(grid >= r_from, res, np.nan)
    return _interior_max(res)


def potential_at_origin(
    M: ModelManifold, f: SourceFunction, kernel: GreenKernel | None = None
) -> TailResult:
    """int_0^inf h(r) f(r) dr, the unnormalized potential of f at the pole."""
    K = kernel or build_kernel(M)
    if K.parabolic:
        raise ParabolicManifold(f"{M.label} is parabolic")
    return integrate_tail(lambda r: np.asarray(K.h(r)) * f(r), 0.0)


def sharpness_family(gamma: float, B: float = 1.0, delta: float = 2.0) -> WarpingFamily:
    """Model warp with radial curvature ~ -r^gamma at infinity."""
    if gamma > -2:
        return WarpingFamily.power_exp(B, gamma)
    if gamma == -2:
        return WarpingFamily.power_law(delta)
    return WarpingFamily.linear_tail()


def sharpness_scan(
    gamma: float,
    alpha_list: Sequence[float],
    n: int = 3,
    B: float = 1.0,
    delta: float = 2.0,
    workers: int | None = None,
) -> list[tuple[float, bool]]:
    """Whether int h (1+r)^{-alpha} converges, for each alpha."""
    if len(alpha_list) == 0:
        raise ValueError("alpha_list must be nonempty")
    M = ModelManifold(n, sharpness_family(gamma, B, delta))
    K = build_kernel(M)

    def one(alpha):
        return float(alpha), potential_at_origin(M, SourceFunction.power_decay(1.0, alpha), K).converged

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, alpha_list))
    return [one(a) for a in alpha_list]


def sharpness_threshold(gamma: float) -> float:
    return model_threshold(gamma)


@dataclass(frozen=True)
class TailSlope:
    gamma: float
    n: int
    fitted: float
    predicted: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.fitted - self.predicted) <= self.tolerance


def asymptotic_tail_check(
    gamma: float,
    n: int = 3,
    r_probe: Sequence[float] | None = None,
    B: float = 1.0,
    delta: float = 2.0,
    tolerance: float = 0.1,
) -> TailSlope:
    """Log-log slope of the Green tail against its predicted power.

    For gamma > -2 the exponential factor exp(-(n-1) B r^{1+gamma/2}) is
    divided out first.
    """
    probes = np.asarray(r_probe if r_probe is not None else np.geomspace(4.0, 400.0, 16), dtype=float)
    if np.any(probes < 4.0):
        raise ValueError("probe radii must lie in the spliced region r >= 4")
    M = ModelManifold(n, sharpness_family(gamma, B, delta))
    K = build_kernel(M)
    y = np.asarray(K.log_g(probes), dtype=float)
    if gamma > -2:
        y = y + (n - 1) * B * probes ** (1.0 + gamma / 2.0)
        predicted = -gamma / 2.0
    elif gamma == -2:
        predicted = -delta * (n - 1) + 1.0
    else:
        predicted = 2.0 - n
    slope = float(np.polyfit(np.log(probes), y, 1)[0])
    return TailSlope(float(gamma), int(n), slope, predicted, tolerance)
