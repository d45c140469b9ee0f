import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fpt_fredholm import (
    Boundary,
    CollocationGrid,
    DensityGrid,
    SolverConfig,
    TailModel,
    bl_density,
    build_system,
    graded_nodes,
    horizon_for_tail,
    ig_density,
    solve,
)

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# collocation points of the closed-form residual checks
CHECK_C = (1.0, 2.0, 4.0, 8.0, 12.0)
# solver setup of the inverse-solve checks
SOLVE_CONFIG = SolverConfig(T=8.0, N=200, K=40, c_min=1.5, c_max=12.0)


@pytest.fixture(scope="session")
def constant():
    return Boundary.constant(1.0)


@pytest.fixture(scope="session")
def linear():
    return Boundary.linear(1.0, 0.5)


@pytest.fixture(scope="session")
def check_grid(constant):
    return CollocationGrid.from_values(CHECK_C, constant)


def exact_density(boundary, T, n=400):
    """Closed-form density on a graded grid, with the matching exact tail."""
    b0, slope = boundary.b0, (boundary.params[1] if len(boundary.params) > 1 else 0.0)
    tail = TailModel(T, float(bl_density(b0, slope, T)), slope, b0)
    return DensityGrid.from_function(lambda s: bl_density(b0, slope, s),
                                     graded_nodes(T, n), tail=tail)


@pytest.fixture(scope="session")
def ig_horizon(constant):
    # mass tail bound at c = 1 with f_sup = sup of the IG density (attained at s = 1/3)
    return horizon_for_tail(constant, 1.0, 1e-9, float(ig_density(1.0, 1.0 / 3.0)))


@pytest.fixture(scope="session")
def ig_exact(constant, ig_horizon):
    """IG density on [0, T] with nothing beyond T."""
    return DensityGrid.from_function(lambda s: ig_density(1.0, s), graded_nodes(ig_horizon, 400))


@pytest.fixture(scope="session")
def constant_system(constant):
    return build_system(constant, SOLVE_CONFIG)


@pytest.fixture(scope="session")
def linear_system(linear):
    return build_system(linear, SOLVE_CONFIG)


@pytest.fixture(scope="session")
def constant_solution(constant_system):
    return solve(constant_system)


@pytest.fixture(scope="session")
def linear_solution(linear_system):
    return solve(linear_system)


def l1_error(density, exact, T, points=20001):
    s = np.linspace(0.0, T, points)
    return float(np.trapezoid(np.abs(density.evaluate(s) - exact(s)), s)) \
        if hasattr(np, "trapezoid") else float(np.trapz(np.abs(density.evaluate(s) - exact(s)), s))
