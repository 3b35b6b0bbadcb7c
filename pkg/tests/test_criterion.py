import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from warpgreen.criterion import (
    CONVERGES,
    DIVERGES,
    INCONCLUSIVE,
    SourceFunction,
    completeness_advisory,
    corollary_threshold,
    evaluate_series,
    green_family,
    model_threshold,
    term_thm1,
    term_thm2,
    thm2_series,
)
from warpgreen.errors import BelowAnchor, InvalidExponents, Unbounded
from warpgreen.green import green_weight, hardy_weight


def test_source_validation():
    with pytest.raises(ValueError):
        SourceFunction.power_decay(0.0, 2.0)
    with pytest.raises(ValueError):
        SourceFunction.power_decay(1.0, math.inf)
    f = SourceFunction.power_decay(2.0, 3.0)
    assert f(1.0) == pytest.approx(0.25)
    assert SourceFunction.zero()(np.array([1.0, 2.0])).tolist() == [0.0, 0.0]


def test_source_scaling():
    f = SourceFunction.power_decay(2.0, 3.0)
    assert f.scaled(3.0).C == 6.0
    neg = f.scaled(-1.0)
    assert neg(1.0) == pytest.approx(-0.25)


def test_thm1_term_flat_closed_form(euclid3, euclid_table, euclid_kernel):
    # sup_{r>=m} 4 r^2 (1+r)^-3 sits at r = m once m > 2
    f = SourceFunction.power_decay(1.0, 3.0)
    m = 100
    inc = 4 * math.sqrt(2) * math.log1p(1 / m)
    want = (inc + 1) * 4 * m**2 / (1 + m) ** 3
    got = term_thm1(euclid3, euclid_table, green_family(euclid_kernel), f, m)
    assert got == pytest.approx(want, rel=1e-9)


def test_thm2_term_flat_closed_form(euclid_table, euclid_kernel):
    f = SourceFunction.power_decay(1.0, 3.0)
    m = 100
    want = 4 * math.sqrt(2) * math.log1p(1 / m) * 4 * m**2 / (1 + m) ** 3
    assert term_thm2(euclid_kernel, euclid_table, f, m) == pytest.approx(want, rel=1e-9)


def test_thm1_hyperbolic_asymptotics(hyper3, hyper_table, hyper_kernel):
    f = SourceFunction.power_decay(1.0, 2.0)
    m = 400
    t = term_thm1(hyper3, hyper_table, green_weight(hyper_kernel), f, m)
    assert t * m**2 == pytest.approx(2.0, rel=0.01)


def test_zero_source_terms(euclid3, euclid_table, euclid_kernel):
    z = SourceFunction.zero()
    assert term_thm1(euclid3, euclid_table, green_family(euclid_kernel), z, 5) == 0.0
    assert term_thm2(euclid_kernel, euclid_table, z, 5) == 0.0


def test_below_anchor(euclid3, euclid_table, euclid_kernel):
    f = SourceFunction.power_decay(1.0, 3.0)
    rho = hardy_weight(euclid3, -2.0, 0.25)
    with pytest.raises(BelowAnchor):
        term_thm1(euclid3, euclid_table, rho, f, 0)


@pytest.mark.parametrize(
    "alpha, verdict, exponent",
    [(3.0, CONVERGES, -2.0), (1.5, DIVERGES, None), (2.0, INCONCLUSIVE, -1.0)],
)
def test_flat_series_verdicts(euclid_kernel, euclid_table, alpha, verdict, exponent):
    rep = thm2_series(euclid_kernel, euclid_table, SourceFunction.power_decay(1.0, alpha))
    assert rep.verdict == verdict
    if exponent is not None:
        assert rep.fit.exponent == pytest.approx(exponent, abs=0.03)
    assert all(b >= a for a, b in zip(rep.partial_sums, rep.partial_sums[1:]))


@pytest.mark.parametrize("alpha, verdict", [(0.5, DIVERGES), (1.5, CONVERGES)])
def test_hyperbolic_series_verdicts(hyper_kernel, hyper_table, alpha, verdict):
    rep = thm2_series(hyper_kernel, hyper_table, SourceFunction.power_decay(1.0, alpha))
    assert rep.verdict == verdict


def test_unbounded_tail_supremum(euclid_kernel, euclid_table):
    # 4 r^2 (1+r)^-1 grows without bound
    with pytest.raises(Unbounded):
        term_thm2(euclid_kernel, euclid_table, SourceFunction.power_decay(1.0, 1.0), 5)


def test_series_synthetic():
    assert evaluate_series(lambda m: m**-2.0).verdict == CONVERGES
    assert evaluate_series(lambda m: m**-0.5).verdict == DIVERGES
    assert evaluate_series(lambda m: 1.0 / m).verdict == INCONCLUSIVE
    fast = evaluate_series(lambda m: math.exp(-0.05 * m))
    assert fast.verdict == CONVERGES and fast.reason == "super-polynomial decay"
    assert evaluate_series(lambda m: 0.0).verdict == CONVERGES
    assert evaluate_series(lambda m: math.inf if m > 40 else 1.0).verdict == DIVERGES


def test_series_arguments():
    with pytest.raises(ValueError):
        evaluate_series(lambda m: 1.0, 2, 10)
    with pytest.raises(ValueError):
        evaluate_series(lambda m: 1.0, margin=0.0)
    with pytest.raises(ValueError):
        evaluate_series(lambda m: -1.0)


def test_series_parallel_matches_serial():
    fn = lambda m: 3.0 * m**-1.7  # noqa: E731
    assert evaluate_series(fn, workers=4).terms == evaluate_series(fn).terms


def test_report_dict(euclid_kernel, euclid_table):
    rep = thm2_series(euclid_kernel, euclid_table, SourceFunction.power_decay(1.0, 3.0), m_max=64)
    d = rep.to_dict()
    assert d["m0"] == 2 and d["m_max"] == 64
    assert d["verdict"] == rep.verdict


def test_corollary_threshold():
    assert corollary_threshold(0, 0) == 1.0
    assert corollary_threshold(2, 1) == 1.0
    assert corollary_threshold(0, -3) == 3.0
    with pytest.raises(InvalidExponents):
        corollary_threshold(-1, -2)
    with pytest.raises(InvalidExponents):
        corollary_threshold(1, 2)


def test_model_threshold():
    assert model_threshold(0) == 1.0
    assert model_threshold(-2) == 2.0
    assert model_threshold(2) == 0.0
    assert model_threshold(-7) == 2.0


def test_completeness_advisory(euclid3):
    assert completeness_advisory(hardy_weight(euclid3, -2.0, 0.25), 1.0)
    assert completeness_advisory(hardy_weight(euclid3, 0.0, 1.0), 1.0)


@given(c=st.floats(0.01, 100.0), m=st.integers(3, 200))
def test_terms_scale_linearly(c, m):
    K, T = _flat()
    f = SourceFunction.power_decay(1.0, 2.5)
    assert term_thm2(K, T, f.scaled(c), m) == pytest.approx(c * term_thm2(K, T, f, m), rel=1e-12)


@given(a1=st.floats(2.0, 4.0), da=st.floats(0.05, 2.0), m=st.integers(3, 200))
def test_terms_decrease_with_alpha(a1, da, m):
    K, T = _flat()
    slow = term_thm2(K, T, SourceFunction.power_decay(1.0, a1), m)
    fast = term_thm2(K, T, SourceFunction.power_decay(1.0, a1 + da), m)
    assert fast <= slow


@given(alpha=st.floats(2.0, 4.0), m=st.integers(2, 200))
def test_thm1_dominates_thm2(alpha, m):
    K, T = _flat()
    f = SourceFunction.power_decay(1.0, alpha)
    assert term_thm1(K.manifold, T, green_family(K), f, m) >= term_thm2(K, T, f, m)


_FLAT: list = []


def _flat():
    if not _FLAT:
        from warpgreen.geometry import ModelManifold, WarpingFamily, build_omega_table
        from warpgreen.green import build_kernel

        M = ModelManifold(3, WarpingFamily.euclidean())
        _FLAT.extend([build_kernel(M), build_omega_table(M)])
    return _FLAT[0], _FLAT[1]
