"""Collocation grids (transform parameters c) and density grids (s-nodes)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .boundary import Boundary
from .closed_forms import bl_density
from .errors import ValidationError
from .quadrature import halved_cell_integrals

__all__ = [
    "MASS_TOLERANCE",
    "CollocationGrid",
    "DensityGrid",
    "TailModel",
    "graded_nodes",
    "graded_weights",
]

MASS_TOLERANCE = 1e-2


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def graded_nodes(T: float, n: int, gamma: float = 2.0) -> np.ndarray:
    """``n`` nodes ``T (i/(n-1))**gamma`` clustered towards 0."""
    if n < 2:
        raise ValidationError("need at least two s-nodes")
    if not T > 0:
        raise ValidationError("horizon T must be positive")
    u = np.linspace(0.0, 1.0, n)
    s = T * u**gamma
    s[-1] = T
    return s


_GREGORY = np.array([3 / 8, 7 / 6, 23 / 24])


def graded_weights(T: float, n: int, gamma: float = 2.0) -> np.ndarray:
    """Quadrature weights matching :func:`graded_nodes`.

    Trapezoid rule in the grading variable ``u`` (``s = T u**gamma``, so
    ``ds = T gamma u**(gamma-1) du``) with fourth-order Gregory end
    corrections once there are at least six nodes.
    """
    graded_nodes(T, n, gamma)
    u = np.linspace(0.0, 1.0, n)
    du = u[1] - u[0]
    end = np.ones(n)
    if n >= 6:
        end[:3] = _GREGORY
        end[-3:] = _GREGORY[::-1]
    else:
        end[[0, -1]] = 0.5
    return T * gamma * u ** (gamma - 1.0) * du * end


@dataclass(frozen=True)
class CollocationGrid:
    """Strictly increasing c-values above the boundary's growth slope ``d``.

    ``scaling[k] = exp(-c_k b0)`` is the row preconditioner.
    """

    c_values: np.ndarray
    scaling: np.ndarray

    def __post_init__(self):
        c = self.c_values
        if c.ndim != 1 or c.size == 0:
            raise ValidationError("collocation grid needs at least one c value")
        if np.any(np.diff(c) <= 0):
            raise ValidationError("c values must be strictly increasing")

    @classmethod
    def from_values(cls, c_values, boundary: Boundary) -> CollocationGrid:
        c = _frozen(np.atleast_1d(c_values))
        if c.size and c.min() <= boundary.growth_d:
            raise ValidationError(
                f"all c must exceed growth_d={boundary.growth_d}, got min c={c.min()}"
            )
        return cls(c, _frozen(np.exp(-c * boundary.b0)))

    @classmethod
    def geometric(cls, c_min, c_max, count, boundary: Boundary) -> CollocationGrid:
        if count < 1:
            raise ValidationError("collocation grid needs at least one c value")
        if count == 1:
            return cls.from_values([c_min], boundary)
        if not c_max > c_min:
            raise ValidationError("c_max must exceed c_min")
        return cls.from_values(np.geomspace(c_min, c_max, count), boundary)

    def __len__(self):
        return self.c_values.size


@dataclass(frozen=True)
class TailModel:
    """Extrapolation of a density beyond the horizon.

    For ``s > T`` the density is ``amplitude * g(s) / g(T)`` with ``g`` the
    first passage density of the line ``level + slope * s``.
    """

    T: float
    amplitude: float
    slope: float
    level: float

    def shape(self, s):
        s = np.asarray(s, dtype=float)
        g_T = bl_density(self.level, self.slope, self.T)
        if g_T == 0.0:
            return np.zeros_like(s)
        return np.asarray(bl_density(self.level, self.slope, s)) / g_T

    def __call__(self, s):
        return self.amplitude * self.shape(s)

    def to_dict(self) -> dict:
        return {"T": self.T, "amplitude": self.amplitude, "slope": self.slope, "level": self.level}


class _PositivePart:
    """Exact running integral of ``max(spline, 0)`` from 0."""

    def __init__(self, spline, s):
        roots = spline.roots(discontinuity=False, extrapolate=False)
        roots = roots[np.isfinite(roots) & (roots > s[0]) & (roots < s[-1])]
        self.breaks = _frozen(np.union1d(s, roots))
        self._anti = spline.antiderivative()
        mid = 0.5 * (self.breaks[1:] + self.breaks[:-1])
        self._pos = spline(mid) > 0
        at = self._anti(self.breaks)
        pieces = np.where(self._pos, np.maximum(np.diff(at), 0.0), 0.0)
        self._at = at
        self._cum = np.concatenate([[0.0], np.cumsum(pieces)])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, self.breaks.size - 2)
        part = np.clip(self._anti(t) - self._at[k], 0.0, self._cum[k + 1] - self._cum[k])
        # the clamp absorbs rounding in cum[k] + (cum[k+1] - cum[k])
        return np.minimum(self._cum[k] + np.where(self._pos[k], part, 0.0), self._cum[k + 1])


@dataclass(frozen=True)
class DensityGrid:
    """Density values on ``[0, T]``, optionally backed by an exact function.

    Between nodes the density is the not-a-knot cubic spline through
    ``f_values`` (piecewise linear below four nodes) unless ``func`` is
    given, in which case ``func`` is used.  The spline is linear in the data
    and fourth-order accurate, which the residual of large-c rows needs; it
    may dip marginally below 0 next to exact zeros.  Masses and the CDF
    integrate its positive part, so the CDF is nondecreasing everywhere.
    Beyond ``T`` the density is ``tail(s)`` if a tail model is attached,
    else 0.

    ``F_values`` (the CDF at the nodes) is filled by
    :func:`fpt_fredholm.solver.cdf_from_density`.
    """

    s_nodes: np.ndarray
    f_values: np.ndarray
    func: Callable | None = field(default=None, repr=False, compare=False)
    tail: TailModel | None = None
    F_values: np.ndarray | None = None
    breakpoints: np.ndarray | None = field(default=None, repr=False)
    _spline: Any = field(default=None, init=False, repr=False, compare=False)
    _positive: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        s, f = self.s_nodes, self.f_values
        if s.ndim != 1 or s.size < 2 or f.shape != s.shape:
            raise ValidationError("s_nodes and f_values must be 1-d arrays of equal length >= 2")
        if s[0] != 0.0:
            raise ValidationError("s_nodes must start at 0")
        if np.any(np.diff(s) <= 0):
            raise ValidationError("s_nodes must be strictly increasing")
        if not np.all(np.isfinite(f)) or np.any(f < 0):
            raise ValidationError("density values must be finite and nonnegative")
        if self.func is None and s.size >= 4:
            spline = CubicSpline(s, f)
            object.__setattr__(self, "_spline", spline)
            object.__setattr__(self, "_positive", _PositivePart(spline, s))
        mass = self.total_mass
        if mass > 1.0 + MASS_TOLERANCE:
            raise ValidationError(f"total mass {mass:.6g} exceeds 1 + {MASS_TOLERANCE}")

    @classmethod
    def from_values(cls, s_nodes, f_values, tail=None, F_values=None) -> DensityGrid:
        F = None if F_values is None else _frozen(F_values)
        return cls(_frozen(s_nodes), _frozen(f_values), tail=tail, F_values=F)

    @classmethod
    def from_function(cls, func, s_nodes, breakpoints=None, tail=None) -> DensityGrid:
        s = _frozen(s_nodes)
        f = _frozen(func(np.asarray(s)))
        bp = None if breakpoints is None else _frozen(np.union1d(s, breakpoints))
        return cls(s, f, func=func, tail=tail, breakpoints=bp)

    @classmethod
    def zeros(cls, s_nodes) -> DensityGrid:
        s = _frozen(s_nodes)
        return cls(s, _frozen(np.zeros_like(s)))

    @property
    def T(self) -> float:
        return float(self.s_nodes[-1])

    @property
    def edges(self) -> np.ndarray:
        """Integration breakpoints on [0, T]."""
        return self.s_nodes if self.breakpoints is None else self.breakpoints

    def evaluate(self, s):
        """Density at arbitrary ``s >= 0``."""
        s = np.asarray(s, dtype=float)
        inside = s <= self.T
        out = np.zeros_like(s)
        if self.func is not None:
            if inside.any():
                out[inside] = np.asarray(self.func(s[inside]), dtype=float)
        elif self._spline is not None:
            out[inside] = self._spline(s[inside])
        else:
            out[inside] = np.interp(s[inside], self.s_nodes, self.f_values)
        if self.tail is not None and (~inside).any():
            out[~inside] = self.tail(s[~inside])
        return out

    def cell_masses(self) -> np.ndarray:
        """Integral of the density (its positive part for splines) over each cell."""
        if self._positive is not None:
            return np.maximum(np.diff(self._positive(self.s_nodes)), 0.0)
        if self.func is None:
            return 0.5 * (self.f_values[1:] + self.f_values[:-1]) * np.diff(self.s_nodes)
        s, bp = self.s_nodes, self.edges
        fine = halved_cell_integrals(self.evaluate, bp[:-1], bp[1:])
        # pool breakpoint cells back into node cells
        cell = np.searchsorted(s, bp[:-1], side="right") - 1
        masses = np.bincount(cell, weights=fine, minlength=s.size - 1)
        return np.maximum(masses, 0.0)

    @property
    def total_mass(self) -> float:
        """Integral of the density over ``[0, T]`` (the tail model is excluded)."""
        return float(self.cell_masses().sum())

    def cdf(self, t):
        """``int_0^t f`` for ``t >= 0``, the tail model included beyond ``T``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValidationError("cdf needs t >= 0")
        s = self.s_nodes
        F = self.F_values
        if F is None:
            F = np.concatenate([[0.0], np.cumsum(self.cell_masses())])
        flat = np.atleast_1d(t).ravel()
        inside = np.minimum(flat, self.T)
        cell = np.clip(np.searchsorted(s, inside, side="right") - 1, 0, s.size - 2)
        if self._positive is not None:
            out = np.minimum(F[cell] + np.clip(self._positive(inside) - self._positive(s[cell]),
                                               0.0, F[cell + 1] - F[cell]), F[cell + 1])
        else:
            out = F[cell] + halved_cell_integrals(self.evaluate, s[cell], inside)
        beyond = flat > self.T
        if beyond.any() and self.tail is not None and self.tail.amplitude != 0.0:
            out[beyond] += [quad(self.tail, self.T, x, epsabs=1e-13, limit=200)[0]
                            for x in flat[beyond]]
        out = out.reshape(np.shape(t))
        return float(out) if out.ndim == 0 else out

    def tail_mass(self) -> float:
        """Mass the tail model places on ``(T, inf)``; 0 without a tail model."""
        if self.tail is None or self.tail.amplitude == 0.0:
            return 0.0
        val, _ = quad(self.tail, self.T, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)
        return float(val)
