"""Discretised first-kind equation and its regularised nonnegative inversion.

The unknown density is sampled on a graded grid ``s_i = T (i/(N-1))**gamma``
and the equation is collocated at ``c_1 < ... < c_K``::

    sum_i kernel(c_k, s_i) w_i f_i  (+ closure_k f_N)  =  1.

``closure_k`` carries the part of the integral beyond ``T``: there the
density is continued as ``f(T) g(s) / g(T)`` with ``g`` the hitting density
of the line ``b0 + d s``.  Regularisation is Tikhonov with a finite
difference penalty, solved exactly under ``f >= 0`` by active-set NNLS.
"""

from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .boundary import Boundary
from .errors import KernelOverflowError, TailBoundError, ValidationError
from .grids import (
    CollocationGrid,
    DensityGrid,
    TailModel,
    graded_nodes,
    graded_weights,
)
from .kernel import (
    EXP_LIMIT,
    QUAD_TOL,
    ResidualReport,
    c_cap,
    log_kernel,
    mass_tail_bound,
    residual,
    tail_template_integral,
)
from .nnls import NnlsResult, nnls

__all__ = [
    "AlphaSelection",
    "KernelSystem",
    "SolveDiagnostics",
    "SolverConfig",
    "assemble_matrix",
    "build_system",
    "bump",
    "bump_density",
    "cdf_from_density",
    "default_c_range",
    "default_noise_level",
    "load_config",
    "penalty_matrix",
    "regularized_solve",
    "select_alpha",
    "solve",
    "uniqueness_stress",
]

# normalising constant of exp(-1/(1-x^2)) on (-1, 1)
_BUMP_NORM = 0.4439938161680794
# the default c_max keeps this many s-nodes inside the kernel's e-folding range
_SUPPORT_NODE = 8
_DISCREPANCY_SAFETY = 2.0


@dataclass(frozen=True)
class SolverConfig:
    """Discretisation and regularisation settings.

    ``c_min``/``c_max`` default to :func:`default_c_range`; ``c_values``
    overrides the geometric grid altogether.  ``alpha`` is a float or
    ``"auto"`` (discrepancy principle over ``[alpha_min, alpha_max]``).
    ``tail_f_sup`` bounds the density beyond ``T`` for the truncation check
    when ``tail_closure`` is off; the default ``2 / T`` holds for any
    sub-probability density that is nonincreasing on ``[T/2, inf)``.
    ``seed`` is carried for provenance only; solving is deterministic.
    """

    T: float = 8.0
    N: int = 200
    K: int = 40
    c_min: float | None = None
    c_max: float | None = None
    c_values: tuple | None = None
    alpha: float | str = "auto"
    alpha_min: float = 1e-14
    alpha_max: float = 1.0
    mass_constraint: float | None = None
    mass_weight: float = 1.0
    penalty_order: int = 2
    max_iters: int | None = None
    tol: float | None = None
    seed: int = 0
    gamma: float = 2.0
    quad_tol: float = QUAD_TOL
    tail_closure: bool = True
    tail_f_sup: float | None = None
    tail_tol: float | None = None
    noise_level: float | None = None
    threshold: float = 1e-4

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValidationError("T must be positive and finite")
        if self.N < 2:
            raise ValidationError("N must be at least 2")
        if self.c_values is None and self.K < 1:
            raise ValidationError("collocation grid is empty (K < 1)")
        if self.c_values is not None:
            object.__setattr__(self, "c_values", tuple(float(c) for c in self.c_values))
            if not self.c_values:
                raise ValidationError("collocation grid is empty")
        if isinstance(self.alpha, str):
            if self.alpha != "auto":
                raise ValidationError(f"alpha must be a number or 'auto', got {self.alpha!r}")
        elif not self.alpha >= 0:
            raise ValidationError("alpha must be >= 0")
        if not 0 < self.alpha_min < self.alpha_max:
            raise ValidationError("need 0 < alpha_min < alpha_max")
        if self.mass_constraint is not None and not 0 < self.mass_constraint <= 1:
            raise ValidationError("mass_constraint must lie in (0, 1]")
        if self.mass_weight <= 0:
            raise ValidationError("mass_weight must be positive")
        if self.penalty_order not in (0, 1, 2):
            raise ValidationError("penalty_order must be 0, 1 or 2")
        if self.gamma < 1:
            raise ValidationError("gamma must be >= 1")
        if self.quad_tol <= 0:
            raise ValidationError("quad_tol must be positive")
        if self.noise_level is not None and self.noise_level <= 0:
            raise ValidationError("noise_level must be positive")
        if self.threshold <= 0:
            raise ValidationError("threshold must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> SolverConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValidationError(f"unknown solver config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        if out["c_values"] is not None:
            out["c_values"] = list(out["c_values"])
        return out

    def replace(self, **changes) -> SolverConfig:
        return dataclasses.replace(self, **changes)


def load_config(path) -> SolverConfig:
    """Read a :class:`SolverConfig` from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    return SolverConfig.from_dict(data)


def default_c_range(boundary: Boundary, s_nodes) -> tuple[float, float]:
    """Engineering default for the collocation range.

    ``c_min = max(d + 0.5, 1)``.  ``c_max`` is the largest c whose
    preconditioned kernel is still above ``1/e`` at the eighth s-node, so
    the kernel's effective support holds at least eight nodes; it is capped
    by :func:`~fpt_fredholm.kernel.c_cap` at the first positive node.
    """
    s = np.asarray(s_nodes, dtype=float)
    c_min = max(boundary.growth_d + 0.5, 1.0)
    node = s[min(_SUPPORT_NODE, s.size - 1)]
    delta = float(boundary.eval(node)) - boundary.b0
    budget = 1.0
    c_support = (delta + math.sqrt(delta * delta + 2.0 * node * budget)) / node
    c_max = min(c_support, c_cap(boundary, s[1]), EXP_LIMIT / boundary.b0)
    return c_min, max(c_max, c_min)


@dataclass(frozen=True)
class KernelSystem:
    """The collocated linear system.

    ``matrix`` holds the unscaled rows ``kernel(c_k, s_i) w_i`` (closure
    column included) whose right-hand side is exactly ``rhs = 1``.
    Multiplying row k by ``scaling[k] = exp(-c_k b0)`` gives
    ``preconditioned_matrix``, whose entries stay in ``[0, w_i]`` for a
    nonincreasing boundary; the matching right-hand side is ``scaling``.
    """

    boundary: Boundary
    config: SolverConfig
    grid: CollocationGrid
    s_nodes: np.ndarray
    weights: np.ndarray
    matrix: np.ndarray
    rhs: np.ndarray
    closure: np.ndarray | None
    tail_template: TailModel | None
    tail_bound: float
    cond_estimate: float
    closure_mass: float = 0.0

    @property
    def scaling(self) -> np.ndarray:
        return self.grid.scaling

    @property
    def preconditioned_matrix(self) -> np.ndarray:
        return self.scaling[:, None] * self.matrix

    @property
    def shape(self):
        return self.matrix.shape

    def mass_vector(self) -> np.ndarray:
        """Row ``v`` with ``v @ f`` the total mass (tail included)."""
        v = self.weights.copy()
        v[-1] += self.closure_mass
        return v


def assemble_matrix(boundary: Boundary, c_values, s_nodes, weights):
    """Unscaled and preconditioned kernel matrices for given nodes and weights.

    Returns
    -------
    matrix, preconditioned : (K, N) arrays
        ``kernel(c_k, s_i) w_i`` and ``exp(-c_k b0) kernel(c_k, s_i) w_i``.

    Raises
    ------
    KernelOverflowError
        If any kernel exponent exceeds the float range budget.
    """
    c = np.atleast_1d(np.asarray(c_values, dtype=float))
    s = np.asarray(s_nodes, dtype=float)
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValidationError("quadrature weights must be nonnegative")
    expo = log_kernel(c[:, None], s[None, :], boundary, precondition=True)
    shift = c * boundary.b0
    worst = float(np.max(expo + shift[:, None]))
    if worst > EXP_LIMIT:
        raise KernelOverflowError(
            f"kernel exponent {worst:.4g} exceeds {EXP_LIMIT}; lower c_max or rescale the boundary"
        )
    pre = np.exp(expo) * w
    return np.exp(shift)[:, None] * pre, pre


def build_system(boundary: Boundary, config: SolverConfig | None = None) -> KernelSystem:
    """Collocate the first-kind equation on the graded s-grid.

    Raises
    ------
    ValidationError
        Empty collocation grid, or some ``c <= growth_d``.
    KernelOverflowError
        A kernel exponent exceeds the float range.
    TailBoundError
        With ``tail_closure`` off: the truncation bound beyond ``T`` exceeds
        ``tail_tol``; increase ``T`` or ``c_min``.
    """
    config = config or SolverConfig()
    s = graded_nodes(config.T, config.N, config.gamma)
    w = graded_weights(config.T, config.N, config.gamma)
    if config.c_values is not None:
        grid = CollocationGrid.from_values(np.asarray(config.c_values), boundary)
    else:
        lo, hi = default_c_range(boundary, s)
        c_min = lo if config.c_min is None else config.c_min
        c_max = hi if config.c_max is None else config.c_max
        if c_min <= boundary.growth_d:
            raise ValidationError(f"c_min={c_min} must exceed growth_d={boundary.growth_d}")
        if config.K > 1 and not c_max > c_min:
            raise ValidationError(f"c_max={c_max} must exceed c_min={c_min}")
        grid = CollocationGrid.geometric(c_min, c_max, config.K, boundary)
    c = grid.c_values
    matrix, _ = assemble_matrix(boundary, c, s, w)

    f_sup = 2.0 / config.T if config.tail_f_sup is None else config.tail_f_sup
    try:
        tb = max(mass_tail_bound(boundary, float(ck), config.T, f_sup) for ck in c)
    except TailBoundError:
        tb = math.inf

    closure = template = None
    closure_mass = 0.0
    if config.tail_closure:
        template = TailModel(config.T, 1.0, boundary.growth_d, boundary.b0)
        closure = np.array([
            tail_template_integral(boundary, float(ck), config.T, template.shape,
                                   tol=config.quad_tol)
            for ck in c
        ])
        matrix = matrix.copy()
        matrix[:, -1] += closure
        closure_mass, _ = quad(template.shape, config.T, np.inf, epsabs=1e-13, limit=200)
    else:
        tail_tol = 0.01 * config.quad_tol if config.tail_tol is None else config.tail_tol
        if not tb <= tail_tol:
            raise TailBoundError(
                f"truncation bound {tb:.3g} beyond T={config.T} exceeds {tail_tol:.3g}; "
                "increase T or c_min, or enable tail_closure"
            )

    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(matrix))
    matrix.setflags(write=False)
    rhs = np.ones(c.size)
    rhs.setflags(write=False)
    return KernelSystem(boundary, config, grid, s, w, matrix, rhs, closure, template,
                        tb, cond, float(closure_mass))


def penalty_matrix(n: int, order: int = 2) -> np.ndarray:
    """Finite-difference operator ``D_p`` of shape ``(n - order, n)``."""
    if order not in (0, 1, 2):
        raise ValidationError("penalty order must be 0, 1 or 2")
    if n <= order:
        return np.zeros((0, n))
    return np.diff(np.eye(n), order, axis=0)


def regularized_solve(matrix, rhs, alpha: float, penalty_order: int = 2,
                      mass_row=None, mass: float | None = None, mass_weight: float = 1.0,
                      max_iter=None, tol=None, passive=None) -> NnlsResult:
    """``argmin ||A f - rhs||^2 + alpha ||D_p f||^2 (+ mass row)`` over ``f >= 0``.

    The penalty and the optional soft mass equation ``mass_row @ f = mass``
    are stacked under ``A`` and the whole system goes to :func:`nnls`.
    """
    A = np.asarray(matrix, dtype=float)
    rows, rhs_parts = [A], [np.asarray(rhs, dtype=float)]
    if mass is not None:
        rows.append(mass_weight * np.asarray(mass_row, dtype=float)[None, :])
        rhs_parts.append([mass_weight * mass])
    if alpha < 0:
        raise ValidationError("alpha must be >= 0")
    if alpha > 0:
        D = penalty_matrix(A.shape[1], penalty_order)
        rows.append(math.sqrt(alpha) * D)
        rhs_parts.append(np.zeros(D.shape[0]))
    return nnls(np.vstack(rows), np.concatenate(rhs_parts), max_iter=max_iter, tol=tol,
                passive=passive)


def _stacked_solve(system: KernelSystem, config: SolverConfig, alpha: float,
                   passive=None) -> NnlsResult:
    return regularized_solve(
        system.matrix, system.rhs, alpha, config.penalty_order,
        mass_row=system.mass_vector(), mass=config.mass_constraint,
        mass_weight=config.mass_weight, max_iter=config.max_iters, tol=config.tol,
        passive=passive,
    )


def _discrepancy(system: KernelSystem, x) -> float:
    return float(np.linalg.norm(system.matrix @ x - system.rhs))


def default_noise_level(system: KernelSystem) -> float:
    """``sqrt(K) (quad_tol + tail)``; the tail term is 0 under tail closure."""
    tail = 0.0 if system.closure is not None else system.tail_bound
    return math.sqrt(len(system.grid)) * (system.config.quad_tol + tail)


@dataclass(frozen=True)
class AlphaSelection:
    """Outcome of :func:`select_alpha`.

    ``warning`` is set when no alpha on the grid met the discrepancy target;
    ``alpha`` is then the smallest grid value.
    """

    alpha: float
    discrepancy: float
    target: float
    warning: bool
    solution: NnlsResult = field(repr=False, compare=False)

    def __float__(self):
        return self.alpha


def select_alpha(system: KernelSystem, noise_level: float | None = None,
                 config: SolverConfig | None = None, bisections: int = 10) -> AlphaSelection:
    """Discrepancy principle: the largest alpha with ``||A f_a - 1|| <= 2 noise``.

    The log-grid ``alpha_max, alpha_max/10, ..., alpha_min`` is scanned from
    the top, each solve warm-started from the previous support, and the
    bracketing decade is then bisected in ``log alpha``.
    """
    config = config or system.config
    noise = default_noise_level(system) if noise_level is None else noise_level
    if not noise > 0:
        raise ValidationError("noise_level must be positive")
    target = _DISCREPANCY_SAFETY * noise

    decades = max(int(round(math.log10(config.alpha_max / config.alpha_min))), 1)
    alphas = np.geomspace(config.alpha_max, config.alpha_min, decades + 1)
    passive = None
    above = None
    for a in alphas:
        sol = _stacked_solve(system, config, float(a), passive)
        passive = sol.passive
        disc = _discrepancy(system, sol.x)
        if disc <= target:
            break
        above = float(a)
    else:
        warnings.warn(
            f"no alpha in [{config.alpha_min:g}, {config.alpha_max:g}] reaches the "
            f"discrepancy target {target:.3g}; using alpha={config.alpha_min:g}",
            RuntimeWarning, stacklevel=2,
        )
        return AlphaSelection(float(alphas[-1]), disc, target, True, sol)

    good, best = float(a), sol
    if above is not None:
        lo, hi = math.log(good), math.log(above)
        for _ in range(bisections):
            mid = 0.5 * (lo + hi)
            trial = _stacked_solve(system, config, math.exp(mid), best.passive)
            if _discrepancy(system, trial.x) <= target:
                lo, best = mid, trial
            else:
                hi = mid
        good = math.exp(lo)
    return AlphaSelection(good, _discrepancy(system, best.x), target, False, best)


@dataclass(frozen=True)
class SolveDiagnostics:
    residual_report: ResidualReport
    discrepancy: float
    alpha_used: float
    active_set_size: int
    cond_estimate: float
    noise_level: float | None = None
    alpha_warning: bool = False
    iterations: int = 0
    total_mass: float = 0.0
    tail_mass: float = 0.0

    def to_dict(self) -> dict:
        return {
            "residual_report": self.residual_report.to_dict(),
            "discrepancy": self.discrepancy,
            "alpha_used": self.alpha_used,
            "active_set_size": self.active_set_size,
            "cond_estimate": self.cond_estimate,
            "noise_level": self.noise_level,
            "alpha_warning": self.alpha_warning,
            "iterations": self.iterations,
            "total_mass": self.total_mass,
            "tail_mass": self.tail_mass,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def cdf_from_density(density: DensityGrid) -> DensityGrid:
    """Copy of ``density`` with ``F_values`` filled by cumulative quadrature."""
    F = np.concatenate([[0.0], np.cumsum(density.cell_masses())])
    F.setflags(write=False)
    return dataclasses.replace(density, F_values=F)


def solve(system: KernelSystem, config: SolverConfig | None = None):
    """Regularised nonnegative solution of ``system``.

    Returns
    -------
    density : DensityGrid
        Node values with CDF filled in and, under tail closure, the fitted
        tail model attached.
    diagnostics : SolveDiagnostics

    Raises
    ------
    ConvergenceError
        The active-set iteration exceeded ``max_iters``.
    ValidationError
        The solution carries more than unit mass on ``[0, T]``.
    """
    config = config or system.config
    noise = None
    warned = False
    if config.alpha == "auto":
        noise = default_noise_level(system) if config.noise_level is None else config.noise_level
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            choice = select_alpha(system, noise, config)
        alpha, sol, warned = choice.alpha, choice.solution, choice.warning
    else:
        alpha = float(config.alpha)
        sol = _stacked_solve(system, config, alpha)

    x = np.maximum(sol.x, 0.0)
    tail = None
    if system.tail_template is not None:
        tail = dataclasses.replace(system.tail_template, amplitude=float(x[-1]))
    try:
        density = cdf_from_density(DensityGrid.from_values(system.s_nodes, x, tail=tail))
    except ValidationError as exc:
        raise ValidationError(
            f"recovered density is not a sub-probability density ({exc}) at alpha={alpha:.3g}; "
            "the system is under-resolved, raise K or alpha"
        ) from exc
    report = residual(system.boundary, density, system.grid, quad_tol=config.quad_tol)
    diagnostics = SolveDiagnostics(
        residual_report=report,
        discrepancy=_discrepancy(system, x),
        alpha_used=alpha,
        active_set_size=int(sol.passive.sum()),
        cond_estimate=system.cond_estimate,
        noise_level=noise,
        alpha_warning=warned,
        iterations=sol.iterations,
        total_mass=density.total_mass,
        tail_mass=density.tail_mass(),
    )
    return density, diagnostics


def bump(center: float, width: float, mass: float):
    """``mass / width * phi((s - center) / width)``, ``phi`` the normalised
    ``exp(-1/(1-x^2))`` on ``(-1, 1)``: smooth, compactly supported, total mass ``mass``."""
    if not width > 0:
        raise ValidationError("bump width must be positive")

    def g(s):
        x = (np.asarray(s, dtype=float) - center) / width
        out = np.zeros_like(x)
        inside = np.abs(x) < 1
        out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
        return mass * out / (_BUMP_NORM * width)

    return g


def bump_density(density: DensityGrid, mass: float, center: float, width: float) -> DensityGrid:
    """``density`` plus :func:`bump`; the bump support must lie in ``[0, T]``.

    A zero ``mass`` returns ``density`` itself.

    Raises
    ------
    ValidationError
        Bad bump geometry, or the perturbed density is negative somewhere.
    """
    if not width > 0:
        raise ValidationError("bump width must be positive")
    lo, hi = center - width, center + width
    if lo < 0 or hi > density.T:
        raise ValidationError(f"bump support [{lo:g}, {hi:g}] must lie in [0, T={density.T:g}]")
    if mass == 0:
        # extra breakpoints would perturb the quadrature at rounding level
        return density
    g = bump(center, width, mass)

    def perturbed(s):
        return density.evaluate(s) + g(s)

    if mass < 0:
        s = density.s_nodes
        probe = np.union1d(np.linspace(lo, hi, 4001), s[(s >= lo) & (s <= hi)])
        worst = float(np.min(perturbed(probe)))
        if worst < 0:
            raise ValidationError(f"perturbed density is negative (min {worst:.3g})")
    breaks = np.union1d(density.edges, np.linspace(lo, hi, 9))
    return DensityGrid.from_function(perturbed, density.s_nodes, breakpoints=breaks,
                                     tail=density.tail)


def uniqueness_stress(boundary: Boundary, density: DensityGrid, grid: CollocationGrid,
                      bump_mass: float, bump_center: float, bump_width: float,
                      quad_tol: float = QUAD_TOL) -> tuple[float, float]:
    """Max residual of ``density`` and of ``density`` plus a bump of mass ``bump_mass``.

    Nothing is rebalanced, so the perturbed density carries ``bump_mass``
    more (or less) mass than the original.  See :func:`bump_density` for
    the bump and its errors.
    """
    other = bump_density(density, bump_mass, bump_center, bump_width)
    before = residual(boundary, density, grid, quad_tol=quad_tol).max_residual
    after = residual(boundary, other, grid, quad_tol=quad_tol).max_residual
    return before, after
