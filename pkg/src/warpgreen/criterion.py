"""Admissibility series for the Poisson equation and their convergence verdicts.

Two series are evaluated term by term.  With ``Dw_m = w(m+1) - w(m)`` the
omega increment and ``S_m = sup_{r >= m} |f / rho|`` the tail supremum,

    thm1:  t_m = (Dw_m + 1) * S_m     (any weight family rho_m)
    thm2:  t_m = Dw_m * S_m           (the Green weight)

Summability is read off a power-law fit of the tail half of the terms: an
exponent clearly below -1 converges, clearly above -1 diverges, and the band
of width ``margin`` around -1 is reported as inconclusive.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from warpgreen.errors import BelowAnchor, DegenerateFit, InvalidExponents, Unbounded
from warpgreen.geometry import ModelManifold, OmegaTable
from warpgreen.green import GreenKernel, WeightFunction, green_weight
from warpgreen.numerics import PowerFit, fit_power_law, integrate_tail, sup_on, vectorized

POWER_DECAY = "power_decay"
CUSTOM = "custom"
ZERO = "zero"

THM1 = "thm1"
THM2 = "thm2"

CONVERGES = "Converges"
DIVERGES = "Diverges"
INCONCLUSIVE = "Inconclusive"

DEFAULT_M0 = 2
DEFAULT_M_MAX = 512
DEFAULT_MARGIN = 0.15


@dataclass(frozen=True)
class SourceFunction:
    kind: str
    C: float = 0.0
    alpha: float = 0.0
    func: Callable | None = field(default=None, repr=False, compare=False)

    @classmethod
    def power_decay(cls, C: float, alpha: float) -> "SourceFunction":
        if not (C > 0 and math.isfinite(C)):
            raise ValueError(f"C must be positive and finite, got {C}")
        if not math.isfinite(alpha):
            raise ValueError("alpha must be finite")
        return cls(POWER_DECAY, float(C), float(alpha))

    @classmethod
    def custom(cls, func: Callable) -> "SourceFunction":
        return cls(CUSTOM, func=func)

    @classmethod
    def zero(cls) -> "SourceFunction":
        return cls(ZERO)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == POWER_DECAY:
            return self.C * (1.0 + r) ** (-self.alpha)
        if self.kind == ZERO:
            return np.zeros_like(r)
        return vectorized(self.func)(np.atleast_1d(r)).reshape(r.shape)

    def scaled(self, c: float) -> "SourceFunction":
        if self.kind == POWER_DECAY and c > 0:
            return SourceFunction.power_decay(self.C * c, self.alpha)
        if self.kind == ZERO:
            return self
        base = self
        return SourceFunction.custom(lambda r: c * base(r))

    @property
    def label(self) -> str:
        if self.kind == POWER_DECAY:
            return f"{self.C:g}/(1+r)^{self.alpha:g}"
        return self.kind


@dataclass(frozen=True)
class CriterionReport:
    variant: str
    terms: tuple[tuple[int, float], ...]
    partial_sums: tuple[float, ...]
    fit: PowerFit | None
    verdict: str
    margin: float
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "verdict": self.verdict,
            "reason": self.reason,
            "margin": self.margin,
            "fit": None
            if self.fit is None
            else {
                "exponent": self.fit.exponent,
                "intercept": self.fit.intercept,
                "r_squared": self.fit.r_squared,
                "n_points": self.fit.n_points,
            },
            "m0": self.terms[0][0],
            "m_max": self.terms[-1][0],
            "last_partial_sum": self.partial_sums[-1],
        }


def default_horizon(m_max: int) -> float:
    return max(10.0 * m_max, 1e4)


def _tail_sup(ratio, m: float, horizon: float | None) -> float:
    res = sup_on(ratio, m, math.inf, horizon=horizon or default_horizon(int(m)))
    return max(res.value, 0.0)


def term_thm1(
    M: ModelManifold,
    table: OmegaTable,
    rho_family: Callable[[int], WeightFunction] | WeightFunction,
    f: SourceFunction,
    m: int,
    horizon: float | None = None,
) -> float:
    """(w(m+1) - w(m) + 1) * sup_{r >= m} |f / rho_m|."""
    if m < table.base_a:
        raise BelowAnchor(f"m={m} is below the omega anchor {table.base_a}")
    rho = rho_family if isinstance(rho_family, WeightFunction) else rho_family(m)
    if m < rho.valid_from:
        raise BelowAnchor(f"weight is only valid from r={rho.valid_from:g}, got m={m}")
    if f.kind == ZERO:
        return 0.0

    def ratio(r):
        return np.abs(f(r)) / np.asarray(rho(r))

    return (table.increment(m) + 1.0) * _tail_sup(ratio, m, horizon)


def term_thm2(
    K: GreenKernel,
    table: OmegaTable,
    f: SourceFunction,
    m: int,
    horizon: float | None = None,
) -> float:
    """(w(m+1) - w(m)) * sup_{r >= m} |f| / rho_green, with 1/rho_green = 4 h^2."""
    K._require()
    if m < table.base_a:
        raise BelowAnchor(f"m={m} is below the omega anchor {table.base_a}")
    if f.kind == ZERO:
        return 0.0

    def ratio(r):
        h = np.asarray(K.h(r))
        return 4.0 * np.abs(f(r)) * h * h

    return table.increment(m) * _tail_sup(ratio, m, horizon)


def _superpolynomial(ms: np.ndarray, ts: np.ndarray, margin: float) -> bool:
    """Log-log slope steepening block by block: faster than any power."""
    blocks = np.array_split(np.arange(ms.size), 4)
    slopes = []
    for b in blocks:
        if b.size < 2 or np.any(ts[b] <= 0):
            return False
        x, y = np.log(ms[b]), np.log(ts[b])
        slopes.append(np.polyfit(x, y, 1)[0])
    slopes = np.array(slopes)
    return bool(
        np.all(np.diff(slopes) < 0) and slopes[0] - slopes[-1] > 0.5 and slopes[-1] < -1.0 - margin
    )


def _eval_terms(term_fn, ms: Sequence[int], workers: int | None) -> list[float]:
    def safe(m):
        try:
            return float(term_fn(m))
        except Unbounded:
            return math.inf

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(safe, ms))
    return [safe(m) for m in ms]


def evaluate_series(
    term_fn: Callable[[int], float],
    m0: int = DEFAULT_M0,
    m_max: int = DEFAULT_M_MAX,
    margin: float = DEFAULT_MARGIN,
    variant: str = THM2,
    workers: int | None = None,
) -> CriterionReport:
    """Terms for m0..m_max, partial sums, tail fit and verdict."""
    if m_max < m0 + 16:
        raise ValueError(f"need m_max >= m0 + 16, got m0={m0}, m_max={m_max}")
    if not margin > 0:
        raise ValueError("margin must be positive")
    ms = list(range(int(m0), int(m_max) + 1))
    ts = _eval_terms(term_fn, ms, workers)
    if any(t < 0 or math.isnan(t) for t in ts):
        raise ValueError("series terms must be nonnegative")
    # ascending-m reduction; inf propagates
    sums = []
    acc: list[float] = []
    for t in ts:
        acc.append(t)
        sums.append(math.inf if math.isinf(t) or (sums and math.isinf(sums[-1])) else math.fsum(acc))
    pairs = tuple(zip(ms, ts))
    sums_t = tuple(sums)

    def report(fit, verdict, reason):
        return CriterionReport(variant, pairs, sums_t, fit, verdict, margin, reason)

    if any(math.isinf(t) for t in ts):
        first = next(m for m, t in pairs if math.isinf(t))
        return report(None, DIVERGES, f"unbounded tail supremum at m={first}")

    half = len(ms) // 2
    tm = np.array(ms[half:], dtype=float)
    tt = np.array(ts[half:], dtype=float)
    if np.all(tt == 0):
        return report(None, CONVERGES, "tail terms vanish")
    if tt[-1] == 0:
        return report(None, CONVERGES, "terms vanish beyond a finite index")
    keep = tt > 0
    try:
        fit = fit_power_law(indices=tm[keep], values=tt[keep])
    except DegenerateFit as exc:
        return report(None, INCONCLUSIVE, f"fit failed: {exc}")
    if _superpolynomial(tm[keep], tt[keep], margin):
        return report(fit, CONVERGES, "super-polynomial decay")
    if fit.exponent < -1.0 - margin:
        return report(fit, CONVERGES, "exponent below -1 - margin")
    if fit.exponent > -1.0 + margin:
        return report(fit, DIVERGES, "exponent above -1 + margin")
    return report(fit, INCONCLUSIVE, "exponent inside the margin band around -1")


def thm1_series(
    M: ModelManifold,
    table: OmegaTable,
    rho_family,
    f: SourceFunction,
    m0: int = DEFAULT_M0,
    m_max: int = DEFAULT_M_MAX,
    margin: float = DEFAULT_MARGIN,
    workers: int | None = None,
) -> CriterionReport:
    horizon = default_horizon(m_max)
    return evaluate_series(
        lambda m: term_thm1(M, table, rho_family, f, m, horizon), m0, m_max, margin, THM1, workers
    )


def thm2_series(
    K: GreenKernel,
    table: OmegaTable,
    f: SourceFunction,
    m0: int = DEFAULT_M0,
    m_max: int = DEFAULT_M_MAX,
    margin: float = DEFAULT_MARGIN,
    workers: int | None = None,
) -> CriterionReport:
    horizon = default_horizon(m_max)
    return evaluate_series(
        lambda m: term_thm2(K, table, f, m, horizon), m0, m_max, margin, THM2, workers
    )


def corollary_threshold(gamma1: float, gamma2: float) -> float:
    """Decay exponent above which the two-sided curvature bounds give solvability."""
    if not (gamma1 >= gamma2 and gamma1 >= 0):
        raise InvalidExponents(f"need gamma1 >= gamma2 and gamma1 >= 0, got ({gamma1}, {gamma2})")
    if gamma2 >= -2:
        return 1.0 + gamma1 / 2.0 - gamma2
    return 3.0 + gamma1 / 2.0


def model_threshold(gamma: float) -> float:
    """Sharp radial threshold on the model family with curvature ~ -r^gamma."""
    return 1.0 - gamma / 2.0 if gamma > -2 else 2.0


def completeness_advisory(rho: WeightFunction, R: float) -> bool:
    """True when int_R^inf sqrt(rho) diverges, i.e. the conformal metric is complete."""
    res = integrate_tail(lambda r: np.sqrt(np.asarray(rho(r))), max(R, rho.valid_from))
    return not res.converged


def green_family(K: GreenKernel) -> Callable[[int], WeightFunction]:
    rho = green_weight(K)
    return lambda m: rho
