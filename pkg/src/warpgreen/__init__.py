"""Green's function diagnostics and radial Poisson solvability on model manifolds."""

from warpgreen._kernels import BACKEND
from warpgreen.criterion import (
    CriterionReport,
    SourceFunction,
    corollary_threshold,
    evaluate_series,
    model_threshold,
    term_thm1,
    term_thm2,
)
from warpgreen.errors import (
    ConfigError,
    DomainError,
    NumericalError,
    TailDivergence,
    WarpGreenError,
)
from warpgreen.geometry import ModelManifold, OmegaTable, WarpingFamily, build_omega_table
from warpgreen.green import GreenKernel, build_kernel, green_weight, hardy_weight
from warpgreen.numerics import QuadratureConfig, integrate, integrate_tail, sup_on
from warpgreen.solver import (
    RadialSolution,
    potential_at_origin,
    residual_check,
    sharpness_scan,
    solve_radial,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "CriterionReport",
    "DomainError",
    "GreenKernel",
    "ModelManifold",
    "NumericalError",
    "OmegaTable",
    "QuadratureConfig",
    "RadialSolution",
    "SourceFunction",
    "TailDivergence",
    "WarpGreenError",
    "WarpingFamily",
    "__version__",
    "build_kernel",
    "build_omega_table",
    "corollary_threshold",
    "evaluate_series",
    "green_weight",
    "hardy_weight",
    "integrate",
    "integrate_tail",
    "model_threshold",
    "potential_at_origin",
    "residual_check",
    "sharpness_scan",
    "solve_radial",
    "sup_on",
    "term_thm1",
    "term_thm2",
]
