"""Time the compiled kernels against their pure-Python twins.

    python benchmarks/bench_kernels.py [--size N] [--repeat R]

Prints one row per kernel with the best-of-R wall time for each backend and
the speedup, then an end-to-end radial solve with each backend swapped in.
Both backends are imported directly, so the result does not depend on
WARPGREEN_PURE.
"""

from __future__ import annotations

import argparse
import math
import sys
import timeit

import numpy as np

from warpgreen import _kernels, _pykernels
from warpgreen.criterion import SourceFunction
from warpgreen.geometry import ModelManifold, WarpingFamily
from warpgreen.solver import ZERO_AT_ORIGIN, solve_radial

try:
    from warpgreen import _ckernels
except ImportError:  # pragma: no cover - only without a compiler
    _ckernels = None


def cases(size: int, rng: np.random.Generator):
    decay = rng.uniform(0.5, 1.0, size)
    incr = rng.normal(size=size)
    du = rng.normal(size=size) * 1e-3
    coef = rng.normal(size=size + 1)
    f = rng.normal(size=size + 1)
    bump = lambda x: math.exp(-((x - 0.37) ** 2)) + 0.01 * math.sin(40 * x)  # noqa: E731
    return {
        "scaled_recurrence": lambda mod: mod.scaled_recurrence(decay, incr),
        "compensated_cumsum": lambda mod: mod.compensated_cumsum(incr),
        "fd_residual": lambda mod: mod.fd_residual(du, coef, f, 1e-3),
        "golden_max": lambda mod: mod.golden_max(bump, 0.0, 1.0, 1e-12, 200),
    }


def best_time(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    loops, _ = timer.autorange()
    return min(timer.repeat(repeat, loops)) / loops


def solve_time(mod, h: float, repeat: int) -> float:
    """Best time of one hyperbolic solve on [0, 30] with ``mod`` as the backend."""
    M = ModelManifold(3, WarpingFamily.hyperbolic())
    f = SourceFunction.power_decay(1.0, 3.0)
    saved = {k: getattr(_kernels, k) for k in _kernels.__all__ if k != "BACKEND"}
    try:
        for k in saved:
            setattr(_kernels, k, getattr(mod, k))
        return min(timeit.repeat(lambda: solve_radial(M, f, 30.0, h, ZERO_AT_ORIGIN), number=1, repeat=repeat))
    finally:
        for k, v in saved.items():
            setattr(_kernels, k, v)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=20_000, help="array length for the array kernels")
    parser.add_argument("--repeat", type=int, default=5, help="timing repeats (best is reported)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<20} {'python [s]':>12} {'cython [s]':>12} {'speedup':>9}")
    for name, call in cases(args.size, rng).items():
        t_py = best_time(lambda: call(_pykernels), args.repeat)
        t_c = best_time(lambda: call(_ckernels), args.repeat)
        print(f"{name:<20} {t_py:12.3e} {t_c:12.3e} {t_py / t_c:8.1f}x")
    h = 30.0 / args.size
    t_py = solve_time(_pykernels, h, args.repeat)
    t_c = solve_time(_ckernels, h, args.repeat)
    print(f"{'solve_radial':<20} {t_py:12.3e} {t_c:12.3e} {t_py / t_c:8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
