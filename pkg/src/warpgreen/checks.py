"""Named pass/fail checks shared by the ``analyze`` and ``verify`` commands.

Each check returns a :class:`Check` carrying the measured value, what it was
compared against and the tolerance, so a report line can be reproduced by
calling the same function again.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from warpgreen.criterion import (
    CONVERGES,
    DIVERGES,
    SourceFunction,
    model_threshold,
    thm2_series,
)
from warpgreen.geometry import ModelManifold, OmegaTable, WarpingFamily, build_omega_table
from warpgreen.green import (
    GreenKernel,
    build_kernel,
    flux_identity_check,
    green_weight,
    hardy_weight,
    log_level_identity_check,
    poincare_spot_check,
    sandwich_fit,
    weighted_tail_energy,
)
from warpgreen.numerics import fit_power_law
from warpgreen.solver import (
    ZERO_AT_ORIGIN,
    potential_at_origin,
    residual_check,
    sharpness_scan,
    solve_radial,
)

# log G spans at most this many e-folds in the level checks; deeper levels
# sit where G underflows for exponential families
_LEVEL_SPAN = 60.0


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    expected: str
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def builtin_families() -> list[WarpingFamily]:
    return [
        WarpingFamily.euclidean(),
        WarpingFamily.hyperbolic(),
        WarpingFamily.power_exp(1.0, 2.0),
        WarpingFamily.power_exp(1.0, 1.0),
        WarpingFamily.power_exp(1.0, 0.0),
        WarpingFamily.power_exp(0.2, 1.0),
        WarpingFamily.power_law(2.0),
        WarpingFamily.linear_tail(),
    ]


def level_window(K: GreenKernel) -> tuple[float, float]:
    """(log s_lo, log s_hi) strictly inside the invertible level range."""
    top = K.log_G(K.r_min) - 0.5
    bottom = max(K.log_G(K.r_max), top - _LEVEL_SPAN) + 0.5
    return bottom, top


def flux_levels(K: GreenKernel, count: int = 16) -> np.ndarray:
    lo, hi = level_window(K)
    return np.exp(np.linspace(hi, lo, count))


def flux_check(K: GreenKernel, count: int = 16, tol: float = 1e-8) -> Check:
    dev = max(abs(flux_identity_check(K, float(s)) - 1.0) for s in flux_levels(K, count))
    return Check(f"flux identity [{K.manifold.label}]", dev, "|flux - 1| = 0", tol, dev <= tol)


def log_level_check(
    K: GreenKernel, rng: np.random.Generator, count: int = 16, tol: float = 1e-6
) -> Check:
    lo, hi = level_window(K)
    worst = 0.0
    for _ in range(count):
        a, b = np.sort(rng.uniform(lo, hi, size=2))
        if b - a < 1e-3:
            b = a + 1e-3
        lhs, rhs = log_level_identity_check(K, math.exp(a), math.exp(b))
        worst = max(worst, abs(lhs / rhs - 1.0))
    return Check(f"log level identity [{K.manifold.label}]", worst, "relative error 0", tol, worst <= tol)


def hardy_reproduction_check(n: int, tol: float = 1e-10) -> Check:
    K = build_kernel(ModelManifold(n, WarpingFamily.euclidean()))
    r = np.geomspace(1e-2, 1e4, 32)
    rho = np.asarray(green_weight(K)(r))
    exact = (n - 2) ** 2 / 4.0 / r**2
    dev = float(np.max(np.abs(rho / exact - 1.0)))
    return Check(f"green weight = (n-2)^2/(4r^2) [n={n}]", dev, "relative error 0", tol, dev <= tol)


def sandwich_check(K: GreenKernel, table: OmegaTable) -> Check:
    n = K.manifold.dim
    b_fit, _ = sandwich_fit(K, table, np.linspace(2.0, 100.0, 99))
    bound = 2.0 * n * (n - 1)
    return Check(f"sandwich B_fit [{K.manifold.label}]", b_fit, f"<= {bound:g}", 0.0, b_fit <= bound)


def tail_energy_check(K: GreenKernel, R: float = 1.0) -> Check:
    res = weighted_tail_energy(K, green_weight(K), R)
    return Check(
        f"weighted tail energy converges [{K.manifold.label}]",
        res.value,
        "converged",
        0.0,
        bool(res.converged),
    )


def omega_exponent_check(M: ModelManifold, expected: float, tol: float = 0.05) -> Check:
    table = build_omega_table(M)
    ms = np.arange(32, 513)
    inc = [table.increment(float(m)) for m in ms]
    slope = fit_power_law(indices=ms, values=inc).exponent
    return Check(f"omega increment exponent [{M.label}]", slope, f"{expected:g}", tol, abs(slope - expected) <= tol)


def series_verdict_check(M: ModelManifold, alpha: float, expected: str, workers=None) -> Check:
    K = build_kernel(M)
    table = build_omega_table(M)
    rep = thm2_series(K, table, SourceFunction.power_decay(1.0, alpha), workers=workers)
    exponent = rep.fit.exponent if rep.fit is not None else math.nan
    return Check(
        f"thm2 series verdict [{M.label}, alpha={alpha:g}] is {expected}",
        exponent,
        expected,
        0.0,
        rep.verdict == expected,
    )


def potential_check(M: ModelManifold, alpha: float, converges: bool) -> Check:
    res = potential_at_origin(M, SourceFunction.power_decay(1.0, alpha))
    want = "converged" if converges else "diverged"
    return Check(
        f"potential at origin [{M.label}, alpha={alpha:g}] {want}",
        res.value,
        want,
        0.0,
        bool(res.converged) == converges,
    )


def beta_integral_check(tol: float = 1e-8) -> Check:
    M = ModelManifold(3, WarpingFamily.euclidean())
    res = potential_at_origin(M, SourceFunction.power_decay(1.0, 4.0))
    return Check("int r (1+r)^-4 dr = 1/6", res.value, "0.16666666666666666", tol, abs(res.value - 1 / 6) <= tol)


def sharpness_checks(gammas=(2.0, 0.0, -2.0, -3.0), offset: float = 0.5, workers=None) -> list[Check]:
    out = []
    for g in gammas:
        a_star = model_threshold(g)
        rows = sharpness_scan(g, [a_star - offset, a_star + offset], workers=workers)
        ok = [conv == (alpha > a_star) for alpha, conv in rows]
        out.append(
            Check(f"sharpness flip [gamma={g:g}, alpha*={a_star:g}]", a_star, "flip at alpha*", 0.0, all(ok))
        )
    return out


def manufactured_source(M: ModelManifold) -> SourceFunction:
    """f = Delta exp(-r^2) for the manifold's own Laplacian."""
    n1 = M.dim - 1
    warp = M.warp

    def f(r):
        r = np.asarray(r, dtype=float)
        e = np.exp(-r * r)
        out = np.full(r.shape, -2.0 * M.dim)  # pole limit n u''(0)
        nz = r > 0
        dL = warp.log_derivs(r[nz])[1]
        out[nz] = (4.0 * r[nz] ** 2 - 2.0) * e[nz] + n1 * dL * (-2.0 * r[nz] * e[nz])
        return out

    return SourceFunction.custom(f)


def manufactured_checks(M: ModelManifold, r_max: float = 20.0, h: float = 5e-3) -> list[Check]:
    f = manufactured_source(M)
    coarse = solve_radial(M, f, r_max, 2 * h, ZERO_AT_ORIGIN)
    fine = solve_radial(M, f, r_max, h, ZERO_AT_ORIGIN)
    ratio = residual_check(M, coarse, f) / residual_check(M, fine, f)
    err = fine.u - (np.exp(-fine.grid**2) - 1.0)
    err_max = float(np.max(np.abs(err - err.mean())))
    label = M.label
    return [
        Check(f"manufactured residual two-grid ratio [{label}]", ratio, "in [3.5, 4.5]", 0.5, 3.5 <= ratio <= 4.5),
        Check(f"manufactured solution error <= h^2 [{label}]", err_max, f"<= {h * h:g}", h * h, err_max <= h * h),
    ]


def quadratic_check(tol: float = 1e-8) -> Check:
    M = ModelManifold(3, WarpingFamily.euclidean())
    f = SourceFunction.custom(lambda r: np.full(np.shape(r), 6.0))
    sol = solve_radial(M, f, 10.0, 1e-3, ZERO_AT_ORIGIN)
    res = residual_check(M, sol, f)
    err = float(np.max(np.abs(sol.u - sol.grid**2)))
    worst = max(res, err)
    return Check("f = 6 recovers u = r^2", worst, "0", tol, worst <= tol)


def fubini_check(M: ModelManifold, alpha: float = 3.0, tol: float = 1e-6) -> Check:
    f = SourceFunction.power_decay(1.0, alpha)
    pot = potential_at_origin(M, f).value
    sol = solve_radial(M, f, None, None)
    rel = abs(-sol.u[0] - pot) / abs(pot)
    return Check(f"potential = -u(0) [{M.label}]", rel, "relative error 0", tol, rel <= tol)


def poincare_checks(trials: int, seed: int) -> list[Check]:
    M = ModelManifold(3, WarpingFamily.euclidean())
    rho = hardy_weight(M, -2.0, 0.25)
    worst = poincare_spot_check(M, rho, trials, seed)
    scaled = poincare_spot_check(M, rho.scaled(4.0), trials, seed)
    return [
        Check("weighted Poincare worst ratio (Hardy weight)", worst, "<= 1.02", 0.02, worst <= 1.02),
        Check("weighted Poincare 4x weight exceeds 1", scaled, "> 1", 0.0, scaled > 1.0),
    ]
