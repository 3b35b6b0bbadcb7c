import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from warpgreen.checks import manufactured_source
from warpgreen.criterion import SourceFunction
from warpgreen.errors import GridTooCoarse, ParabolicManifold, TailDivergence
from warpgreen.geometry import ModelManifold, WarpingFamily
from warpgreen.solver import (
    VANISH_AT_INFINITY,
    ZERO_AT_ORIGIN,
    asymptotic_tail_check,
    potential_at_origin,
    residual_check,
    sharpness_scan,
    sharpness_threshold,
    solve_radial,
)

SIX = SourceFunction.custom(lambda r: np.full(np.shape(r), 6.0))


def test_quadratic_exact(euclid3):
    sol = solve_radial(euclid3, SIX, 10.0, 1e-3, ZERO_AT_ORIGIN)
    assert np.max(np.abs(sol.u - sol.grid**2)) < 1e-9
    assert np.max(np.abs(sol.u_prime - 2 * sol.grid)) < 1e-9
    assert residual_check(euclid3, sol, SIX) < 1e-8
    assert sol.u_prime[0] == 0.0
    assert sol.sign_convention == "Delta u = +f"


def test_beta_integral_at_origin(euclid3, euclid_kernel):
    f = SourceFunction.power_decay(1.0, 4.0).scaled(-1.0)
    sol = solve_radial(euclid3, f, 50.0, 0.01, kernel=euclid_kernel)
    assert sol.u[0] == pytest.approx(1 / 6, rel=1e-8)
    pot = potential_at_origin(euclid3, SourceFunction.power_decay(1.0, 4.0), euclid_kernel)
    assert pot.converged and pot.value == pytest.approx(1 / 6, rel=1e-9)


def test_zero_source(euclid3, euclid_kernel):
    for norm in (ZERO_AT_ORIGIN, VANISH_AT_INFINITY):
        sol = solve_radial(euclid3, SourceFunction.zero(), 5.0, 0.01, norm, euclid_kernel)
        assert np.all(sol.u == 0.0)


def test_potential_verdicts(euclid3, hyper3, euclid_kernel, hyper_kernel):
    assert not potential_at_origin(euclid3, SourceFunction.power_decay(1.0, 2.0), euclid_kernel).converged
    assert potential_at_origin(hyper3, SourceFunction.power_decay(1.0, 1.5), hyper_kernel).converged


def test_tail_divergence(euclid3, euclid_kernel):
    with pytest.raises(TailDivergence):
        solve_radial(euclid3, SourceFunction.power_decay(1.0, 1.5), kernel=euclid_kernel)


def test_parabolic():
    w = WarpingFamily.tabulated([[0, 0, 1, 0], [1, 0.75, 0.5, -0.5], [2, 1, 0, 0]])
    M = ModelManifold(3, w)
    with pytest.raises(ParabolicManifold):
        potential_at_origin(M, SourceFunction.power_decay(1.0, 3.0))
    with pytest.raises(TailDivergence):
        solve_radial(M, SourceFunction.power_decay(1.0, 3.0))
    sol = solve_radial(M, SourceFunction.power_decay(1.0, 3.0), 10.0, 0.01, ZERO_AT_ORIGIN)
    assert sol.u[0] == 0.0


def test_grid_too_coarse(euclid3):
    sol = solve_radial(euclid3, SIX, 1.0, 0.05, ZERO_AT_ORIGIN)
    with pytest.raises(GridTooCoarse):
        residual_check(euclid3, sol, SIX)


def test_bad_arguments(euclid3):
    with pytest.raises(ValueError):
        solve_radial(euclid3, SIX, -1.0, 0.1, ZERO_AT_ORIGIN)
    with pytest.raises(ValueError):
        solve_radial(euclid3, SIX, 1.0, 0.1, "Neumann")


def test_hyperbolic_two_grid(hyper3, hyper_kernel):
    f = SourceFunction.power_decay(1.0, 3.0)
    coarse = solve_radial(hyper3, f, 20.0, 0.02, kernel=hyper_kernel)
    fine = solve_radial(hyper3, f, 20.0, 0.01, kernel=hyper_kernel)
    away = residual_check(hyper3, coarse, f, r_from=1.0) / residual_check(hyper3, fine, f, r_from=1.0)
    assert 3.5 <= away <= 4.5
    # f'(0) != 0 makes the pole-adjacent residual first order
    near = residual_check(hyper3, coarse, f) / residual_check(hyper3, fine, f)
    assert near == pytest.approx(2.0, abs=0.3)


def test_residual_independent_of_normalization(hyper3, hyper_kernel):
    f = SourceFunction.power_decay(1.0, 3.0)
    a = solve_radial(hyper3, f, 20.0, 0.01, ZERO_AT_ORIGIN)
    b = solve_radial(hyper3, f, 20.0, 0.01, VANISH_AT_INFINITY, hyper_kernel)
    assert abs(residual_check(hyper3, a, f) - residual_check(hyper3, b, f)) <= 1e-12
    diff = b.u - a.u
    assert np.ptp(diff) <= 1e-12 * np.max(np.abs(b.u))


@pytest.mark.parametrize(
    "w",
    [WarpingFamily.euclidean(), WarpingFamily.hyperbolic(), WarpingFamily.power_exp(1.0, 2.0), WarpingFamily.linear_tail()],
    ids=lambda w: w.label,
)
def test_manufactured_fourth_order_values(w):
    M = ModelManifold(3, w)
    f = manufactured_source(M)
    errs = []
    for h in (0.02, 0.01):
        sol = solve_radial(M, f, 10.0, h, ZERO_AT_ORIGIN)
        errs.append(np.max(np.abs(sol.u - (np.exp(-sol.grid**2) - 1.0))))
    assert errs[1] < 1e-9
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.1)


@pytest.mark.parametrize(
    "gamma, alphas, flips",
    [
        (0.0, [0.5, 1.5], [False, True]),
        (-2.0, [1.5, 2.5], [False, True]),
        (-3.0, [1.5, 2.5], [False, True]),
        (2.0, [-0.5, 0.5], [False, True]),
    ],
)
def test_sharpness_scan(gamma, alphas, flips):
    rows = sharpness_scan(gamma, alphas)
    assert [c for _, c in rows] == flips
    assert sharpness_threshold(gamma) == pytest.approx(np.mean(alphas))


def test_sharpness_scan_needs_alphas():
    with pytest.raises(ValueError):
        sharpness_scan(0.0, [])


@pytest.mark.parametrize("gamma, predicted", [(0.0, 0.0), (-2.0, -3.0), (-3.0, -1.0), (2.0, -1.0)])
def test_tail_slopes(gamma, predicted):
    res = asymptotic_tail_check(gamma)
    assert res.predicted == predicted
    assert res.passed


def test_tail_probe_region():
    with pytest.raises(ValueError):
        asymptotic_tail_check(0.0, r_probe=[1.0, 10.0])


@given(c1=st.floats(-3, 3), c2=st.floats(-3, 3), a1=st.floats(2.5, 5), a2=st.floats(2.5, 5))
def test_solution_linear_in_source(c1, c2, a1, a2):
    M = ModelManifold(3, WarpingFamily.hyperbolic())
    f1 = SourceFunction.power_decay(1.0, a1)
    f2 = SourceFunction.power_decay(1.0, a2)
    both = SourceFunction.custom(lambda r: c1 * f1(r) + c2 * f2(r))
    u = solve_radial(M, both, 8.0, 0.02, ZERO_AT_ORIGIN).u
    u1 = solve_radial(M, f1, 8.0, 0.02, ZERO_AT_ORIGIN).u
    u2 = solve_radial(M, f2, 8.0, 0.02, ZERO_AT_ORIGIN).u
    assert np.allclose(u, c1 * u1 + c2 * u2, rtol=1e-10, atol=1e-12)


@given(alpha=st.floats(1.3, 5.0))
def test_potential_equals_minus_u0(alpha):
    M = ModelManifold(3, WarpingFamily.hyperbolic())
    K = _hyper_kernel()
    f = SourceFunction.power_decay(1.0, alpha)
    pot = potential_at_origin(M, f, K)
    sol = solve_radial(M, f, kernel=K)
    assert -sol.u[0] == pytest.approx(pot.value, rel=1e-6)


_K: list = []


def _hyper_kernel():
    if not _K:
        from warpgreen.green import build_kernel

        _K.append(build_kernel(ModelManifold(3, WarpingFamily.hyperbolic())))
    return _K[0]
