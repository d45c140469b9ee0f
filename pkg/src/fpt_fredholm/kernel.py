"""Kernel of the first-kind equation, moment integrals, tail bounds, residuals.

For a boundary ``b`` with density ``f`` of the first passage time,

    1 = int_0^inf exp(-c^2 s / 2 + c b(s)) f(s) ds      for all c > d.

Integrals are evaluated in the preconditioned form
``exp(-c^2 s/2 + c (b(s) - b0))`` and rescaled by ``exp(c b0)`` at the end,
which keeps every intermediate value bounded.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .boundary import Boundary
from .errors import KernelOverflowError, TailBoundError, ValidationError
from .grids import CollocationGrid, DensityGrid
from .quadrature import composite_gauss

__all__ = [
    "EXP_LIMIT",
    "QUAD_TOL",
    "ResidualReport",
    "c_cap",
    "horizon_for_tail",
    "kernel",
    "log_kernel",
    "mass_tail_bound",
    "moment_identity_check",
    "moment_integral",
    "preconditioned_kernel",
    "residual",
    "tail_bound",
    "tail_template_integral",
]

EXP_LIMIT = 700.0
QUAD_TOL = 1e-9
# relative accuracy floor of the preconditioned integrals (rounding level)
QUAD_RTOL = 1e-12
# smallest preconditioned kernel value allowed at the first positive s-node
_CAP_FLOOR = 1e-300


def log_kernel(c, s, boundary: Boundary, precondition: bool = False, extended: bool = False):
    """Exponent ``-c^2 s/2 + c b(s)``, minus ``c b0`` if ``precondition``."""
    s = np.asarray(s, dtype=float)
    b = boundary.eval_extended(s) if extended else boundary.eval(s)
    shift = boundary.b0 if precondition else 0.0
    return -0.5 * c * c * s + c * (np.asarray(b) - shift)


def _exp_checked(expo):
    expo = np.asarray(expo, dtype=float)
    if np.any(expo > EXP_LIMIT):
        raise KernelOverflowError(
            f"kernel exponent {float(np.max(expo)):.4g} exceeds {EXP_LIMIT}; "
            "reduce c or rescale the boundary"
        )
    out = np.exp(expo)
    return float(out) if out.ndim == 0 else out


def kernel(c, s, boundary: Boundary):
    """``exp(-c^2 s/2 + c b(s))``; positive for every admissible input."""
    if np.any(np.asarray(s) < 0):
        raise ValidationError("kernel needs s >= 0")
    return _exp_checked(log_kernel(c, s, boundary))


def preconditioned_kernel(c, s, boundary: Boundary):
    """``exp(-c b0) * kernel(c, s, b)``."""
    if np.any(np.asarray(s) < 0):
        raise ValidationError("kernel needs s >= 0")
    return _exp_checked(log_kernel(c, s, boundary, precondition=True))


def _require_c(boundary, c):
    if not c > boundary.growth_d:
        raise ValidationError(f"c={c} must exceed growth_d={boundary.growth_d}")
    if c * boundary.b0 > EXP_LIMIT:
        raise KernelOverflowError(f"c * b0 = {c * boundary.b0:.4g} overflows the rescaling")


def tail_template_integral(boundary: Boundary, c: float, T: float, shape,
                           n: int = 0, precondition: bool = False, tol: float = QUAD_TOL) -> float:
    """``int_T^inf kernel(c, s) s^n shape(s) ds`` for a tail shape function.

    Tabulated boundaries are continued past their last node with slope
    ``growth_d`` (see :meth:`Boundary.eval_extended`).
    """

    def integrand(s):
        # combine in log space: for c < 2m the kernel alone overflows where the shape underflows
        g = float(shape(s))
        if g <= 0.0:
            return 0.0
        return math.exp(float(log_kernel(c, s, boundary, precondition=True, extended=True)) + math.log(g)) * s**n

    scale = 1.0 if precondition else math.exp(c * boundary.b0)
    val, _ = quad(integrand, T, np.inf, epsabs=0.1 * tol / scale, epsrel=1e-10, limit=400)
    return scale * val


def moment_integral(boundary: Boundary, density: DensityGrid, n: int, c: float,
                    quad_tol: float = QUAD_TOL, include_tail: bool = True) -> float:
    """``I(n)(c) = int e^{-c^2 s/2 + c b(s)} s^n f(s) ds`` over ``[0, T]``.

    Adds the tail model's contribution on ``(T, inf)`` when the density
    carries one and ``include_tail`` is set.  The quadrature error estimate
    is kept below ``quad_tol`` (absolute, in units of ``I``) or, when that is
    beneath rounding level, below ``1e-12`` relative; otherwise
    :class:`~fpt_fredholm.errors.QuadratureError` is raised.
    """
    if n < 0:
        raise ValidationError("moment order must be >= 0")
    _require_c(boundary, c)
    scale = math.exp(c * boundary.b0)

    def integrand(s):
        k = _exp_checked(log_kernel(c, s, boundary, precondition=True))
        return k * s**n * density.evaluate(s)

    val, _ = composite_gauss(integrand, density.edges, tol=quad_tol / scale, rtol=QUAD_RTOL)
    total = scale * val
    if include_tail and density.tail is not None and density.tail.amplitude != 0.0:
        total += density.tail.amplitude * tail_template_integral(
            boundary, c, density.T, density.tail.shape, n=n, tol=quad_tol
        )
    return total


def tail_bound(boundary: Boundary, n: int, c: float, T: float, f_sup: float) -> float:
    """Upper bound on ``int_T^inf e^{-c^2 s/2 + c b(s)} s^n f(s) ds``.

    Uses ``b(s) <= M + m s`` and ``s^n <= n^n e^{-n} e^s`` (with ``0^0 = 1``)::

        n^n e^{-n} f_sup / (c^2/2 - 1 - c m) * exp(T (c m - c^2/2 + 1) + c M)

    Valid only while ``c^2/2 - 1 - c m > 0``.
    """
    M, m = boundary.growth_M, boundary.growth_m
    denom = 0.5 * c * c - 1.0 - c * m
    if not denom > 0:
        raise TailBoundError(
            f"tail bound needs c^2/2 - 1 - c m > 0 (got {denom:.4g} at c={c}, m={m}); "
            "use a larger c or a smaller growth certificate m"
        )
    if f_sup < 0:
        raise ValidationError("f_sup must be >= 0")
    log_poly = 0.0 if n == 0 else n * math.log(n) - n
    expo = log_poly + T * (c * m - 0.5 * c * c + 1.0) + c * M
    return f_sup * math.exp(expo) / denom


def mass_tail_bound(boundary: Boundary, c: float, T: float, f_sup: float) -> float:
    """Zeroth-moment tail bound without the polynomial slack::

        f_sup * exp(c M - (c^2/2 - c m) T) / (c^2/2 - c m)

    Valid for ``c > 2 m``; tighter than :func:`tail_bound` at ``n = 0``.
    """
    M, m = boundary.growth_M, boundary.growth_m
    rate = 0.5 * c * c - c * m
    if not rate > 0:
        raise TailBoundError(f"mass tail bound needs c > 2m (c={c}, m={m})")
    if f_sup < 0:
        raise ValidationError("f_sup must be >= 0")
    return f_sup * math.exp(c * M - rate * T) / rate


def horizon_for_tail(boundary: Boundary, c: float, tol: float, f_sup: float) -> float:
    """Smallest ``T`` with ``mass_tail_bound(boundary, c, T, f_sup) <= tol``."""
    M, m = boundary.growth_M, boundary.growth_m
    rate = 0.5 * c * c - c * m
    if not rate > 0:
        raise TailBoundError(f"no finite horizon: c={c} does not exceed 2m={2 * m}")
    T = max((c * M + math.log(f_sup / (rate * tol))) / rate, 0.0)
    # the closed form can land a rounding error above tol; step up until it holds
    while T > 0 and mass_tail_bound(boundary, c, T, f_sup) > tol:
        T *= 1.0 + 1e-12
    return T


def c_cap(boundary: Boundary, s1: float) -> float:
    """Largest c keeping the preconditioned kernel at ``s1`` above 1e-300."""
    if not s1 > 0:
        raise ValidationError("s1 must be positive")
    delta = float(boundary.eval(s1)) - boundary.b0
    budget = -math.log(_CAP_FLOOR)
    # solve c^2 s1 / 2 - c delta = budget for the positive root
    return (delta + math.sqrt(delta * delta + 2.0 * s1 * budget)) / s1


@dataclass(frozen=True)
class ResidualReport:
    """Per-c residuals ``|I(0)(c) - 1|`` of a candidate density."""

    c_values: tuple
    residuals: tuple
    max_residual: float
    tail_bound_max: float

    @property
    def per_c(self):
        return list(zip(self.c_values, self.residuals))

    def to_dict(self) -> dict:
        return {
            "per_c": [[c, r] for c, r in self.per_c],
            "max_residual": self.max_residual,
            "tail_bound_max": self.tail_bound_max,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> ResidualReport:
        pairs = data["per_c"]
        return cls(
            tuple(float(c) for c, _ in pairs),
            tuple(float(r) for _, r in pairs),
            float(data["max_residual"]),
            float(data["tail_bound_max"]),
        )


def residual(boundary: Boundary, density: DensityGrid, grid: CollocationGrid,
             f_sup: float | None = None, quad_tol: float = QUAD_TOL,
             workers: int | None = None) -> ResidualReport:
    """Residual of the integral equation at every c of ``grid``.

    ``tail_bound_max`` bounds what the residual cannot see beyond ``T``: it is
    0 when the density carries a tail model (the tail is integrated), else the
    largest :func:`mass_tail_bound` over the grid with ``f_sup`` defaulting to
    ``f(T)`` (exact for densities decreasing beyond ``T``).  It is ``inf``
    when some c does not exceed ``2 m``.
    """
    cs = [float(c) for c in grid.c_values]

    def one(c):
        return abs(moment_integral(boundary, density, 0, c, quad_tol=quad_tol) - 1.0)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            res = list(pool.map(one, cs))
    else:
        res = [one(c) for c in cs]

    if density.tail is not None:
        tb = 0.0
    else:
        sup = float(density.evaluate(np.array([density.T]))[0]) if f_sup is None else f_sup
        try:
            tb = max(mass_tail_bound(boundary, c, density.T, sup) for c in cs)
        except TailBoundError:
            tb = math.inf
    return ResidualReport(tuple(cs), tuple(res), max(res), tb)


def moment_identity_check(boundary: Boundary, density: DensityGrid, c: float,
                          quad_tol: float = QUAD_TOL) -> float:
    """``int (b(s) - c s) e^{-c^2 s/2 + c (b(s) - b0)} f(s) ds``.

    This is ``e^{-c b0}`` times the c-derivative of the unit right-hand side,
    so it vanishes for an exact first passage density (up to the tail beyond
    ``T`` when no tail model is attached).
    """
    _require_c(boundary, c)

    def integrand(s):
        k = _exp_checked(log_kernel(c, s, boundary, precondition=True))
        return (np.asarray(boundary.eval(s)) - c * s) * k * density.evaluate(s)

    val, _ = composite_gauss(integrand, density.edges, tol=quad_tol)
    tail = density.tail
    if tail is not None and tail.amplitude != 0.0:
        t0 = tail_template_integral(
            boundary, c, density.T,
            lambda s: float(boundary.eval_extended(s)) * float(tail.shape(s)),
            precondition=True, tol=quad_tol,
        )
        t1 = tail_template_integral(boundary, c, density.T, tail.shape, n=1,
                                    precondition=True, tol=quad_tol)
        val += tail.amplitude * (t0 - c * t1)
    return val
