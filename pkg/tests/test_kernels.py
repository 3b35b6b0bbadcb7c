import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from warpgreen import _kernels, _pykernels

ck = pytest.importorskip("warpgreen._ckernels")

finite = st.floats(-1e6, 1e6, allow_nan=False)
positive = st.floats(0.0, 1.5, allow_nan=False)


def test_backend_name():
    assert _kernels.BACKEND in ("cython", "python")


def test_scaled_recurrence_small():
    out = _pykernels.scaled_recurrence([0.0, 0.5, 2.0], [1.0, 1.0, 1.0])
    assert out.tolist() == [0.0, 1.0, 1.5, 4.0]


def test_compensated_cumsum_recovers_small_terms():
    x = np.array([1e16, 1.0, -1e16, 1.0])
    assert _pykernels.compensated_cumsum(x)[-1] == 2.0
    assert ck.compensated_cumsum(x)[-1] == 2.0


def test_fd_residual_quadratic():
    h = 0.1
    r = np.arange(0, 11) * h
    du = np.diff(r**2)
    coef = np.zeros_like(r)
    coef[1:] = 2.0 / r[1:]
    res = _pykernels.fd_residual(du, coef, np.full_like(r, 6.0), h)
    assert math.isnan(res[0]) and math.isnan(res[-1])
    assert np.allclose(res[1:-1], 0.0, atol=1e-12)


def test_golden_max_parabola():
    x, fx = _pykernels.golden_max(lambda t: -((t - 0.3) ** 2), 0.0, 1.0, 1e-12, 200)
    assert x == pytest.approx(0.3, abs=1e-6)
    assert fx == pytest.approx(0.0, abs=1e-12)


@given(n=st.integers(1, 60), data=st.data())
def test_scaled_recurrence_parity(n, data):
    decay = data.draw(arrays(float, n, elements=positive))
    incr = data.draw(arrays(float, n, elements=finite))
    assert np.array_equal(_pykernels.scaled_recurrence(decay, incr), np.asarray(ck.scaled_recurrence(decay, incr)))


@given(arrays(float, st.integers(0, 80), elements=finite))
def test_cumsum_parity(x):
    assert np.array_equal(_pykernels.compensated_cumsum(x), np.asarray(ck.compensated_cumsum(x)))


@given(n=st.integers(2, 60), h=st.floats(1e-4, 1.0), data=st.data())
def test_fd_residual_parity(n, h, data):
    du = data.draw(arrays(float, n, elements=finite))
    coef = data.draw(arrays(float, n + 1, elements=finite))
    f = data.draw(arrays(float, n + 1, elements=finite))
    a = _pykernels.fd_residual(du, coef, f, h)
    b = np.asarray(ck.fd_residual(du, coef, f, h))
    assert np.array_equal(a, b, equal_nan=True)


@given(c=st.floats(-5, 5), lo=st.floats(-10, 0), width=st.floats(0.1, 20))
def test_golden_parity(c, lo, width):
    f = lambda t: -abs(t - c) + 0.1 * math.sin(t)  # noqa: E731
    a = _pykernels.golden_max(f, lo, lo + width, 1e-10, 200)
    b = ck.golden_max(f, lo, lo + width, 1e-10, 200)
    assert a == tuple(b)


def test_benchmark_runs(capsys):
    import runpy
    from pathlib import Path

    bench = runpy.run_path(str(Path(__file__).parents[1] / "benchmarks" / "bench_kernels.py"))
    assert bench["main"](["--size", "2000", "--repeat", "1"]) == 0
    out = capsys.readouterr().out
    assert "scaled_recurrence" in out and "solve_radial" in out
