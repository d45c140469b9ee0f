"""First passage time densities of Brownian motion over curved boundaries.

The density ``f`` of ``tau = inf{t >= 0 : W_t >= b(t)}`` is recovered from

    1 = int_0^inf exp(-c^2 s / 2 + c b(s)) f(s) ds,      c > d,

by collocation in ``c`` and regularised nonnegative least squares, and is
checked through residuals of that equation, closed forms and Monte Carlo.
"""

__version__ = "0.1.0"

from .boundary import Boundary, BoundaryKind, CertResult, certify_growth, load_boundary
from .closed_forms import (
    ClosedFormDensity,
    bl_cdf,
    bl_density,
    closed_form_for,
    ig_cdf,
    ig_density,
    std_normal_cdf,
)
from .errors import (
    ConvergenceError,
    DomainError,
    FptError,
    KernelOverflowError,
    QuadratureError,
    RangeError,
    TailBoundError,
    ValidationError,
)
from .grids import CollocationGrid, DensityGrid, TailModel, graded_nodes, graded_weights
from .kernel import (
    ResidualReport,
    horizon_for_tail,
    kernel,
    mass_tail_bound,
    moment_identity_check,
    moment_integral,
    preconditioned_kernel,
    residual,
    tail_bound,
)
from .mc import EmpiricalFpt, McConfig, ks_distance, simulate
from .nnls import nnls
from .solver import (
    AlphaSelection,
    KernelSystem,
    SolveDiagnostics,
    SolverConfig,
    assemble_matrix,
    build_system,
    bump,
    bump_density,
    cdf_from_density,
    default_c_range,
    load_config,
    penalty_matrix,
    regularized_solve,
    select_alpha,
    solve,
    uniqueness_stress,
)

__all__ = [
    "AlphaSelection",
    "Boundary",
    "BoundaryKind",
    "CertResult",
    "ClosedFormDensity",
    "CollocationGrid",
    "ConvergenceError",
    "DensityGrid",
    "DomainError",
    "EmpiricalFpt",
    "FptError",
    "KernelOverflowError",
    "KernelSystem",
    "McConfig",
    "QuadratureError",
    "RangeError",
    "ResidualReport",
    "SolveDiagnostics",
    "SolverConfig",
    "TailBoundError",
    "TailModel",
    "ValidationError",
    "assemble_matrix",
    "bl_cdf",
    "bl_density",
    "build_system",
    "bump",
    "bump_density",
    "cdf_from_density",
    "certify_growth",
    "closed_form_for",
    "default_c_range",
    "graded_nodes",
    "graded_weights",
    "horizon_for_tail",
    "ig_cdf",
    "ig_density",
    "kernel",
    "ks_distance",
    "load_boundary",
    "load_config",
    "mass_tail_bound",
    "moment_identity_check",
    "moment_integral",
    "nnls",
    "penalty_matrix",
    "preconditioned_kernel",
    "regularized_solve",
    "residual",
    "select_alpha",
    "simulate",
    "solve",
    "std_normal_cdf",
    "tail_bound",
    "uniqueness_stress",
]
