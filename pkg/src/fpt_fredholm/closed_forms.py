"""Exact first passage densities and distribution functions.

Only the constant boundary (inverse Gaussian law) and the linear boundary
(Bachelier-Levy law) are covered.  Both serve as oracles for the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .boundary import Boundary, BoundaryKind
from .errors import DomainError, ValidationError

__all__ = [
    "ClosedFormDensity",
    "bl_cdf",
    "bl_density",
    "closed_form_for",
    "ig_cdf",
    "ig_density",
    "std_normal_cdf",
]

_SQRT2 = np.sqrt(2.0)
_SQRT_2PI = np.sqrt(2.0 * np.pi)


def std_normal_cdf(x):
    """Phi(x) through erfc, accurate in both tails."""
    return 0.5 * erfc(-np.asarray(x, dtype=float) / _SQRT2)


def _times(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise DomainError("first passage time must be >= 0")
    return s


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def bl_density(b0, slope, s):
    """Density of the first hitting time of ``b0 + slope * t``.

    ``b0 / sqrt(2 pi s^3) * exp(-(b0 + slope s)^2 / (2 s))``, with value 0 at
    ``s = 0``.  For ``slope > 0`` the density integrates to
    ``exp(-2 b0 slope)``.
    """
    if b0 <= 0:
        raise ValidationError("b0 must be positive")
    s = _times(s)
    out = np.zeros_like(s)
    pos = s > 0
    sp = s[pos]
    out[pos] = b0 / (_SQRT_2PI * sp * np.sqrt(sp)) * np.exp(-((b0 + slope * sp) ** 2) / (2.0 * sp))
    return _scalar(out)


def ig_density(b0, s):
    """Inverse Gaussian (Levy) density of the hitting time of level ``b0``."""
    return bl_density(b0, 0.0, s)


def bl_cdf(b0, slope, t):
    """``P(tau <= t)`` for the boundary ``b0 + slope * t``.

    Phi(-(b0 + slope t)/sqrt t) + exp(-2 b0 slope) Phi((slope t - b0)/sqrt t)
    """
    if b0 <= 0:
        raise ValidationError("b0 must be positive")
    t = _times(t)
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    rt = np.sqrt(tp)
    first = std_normal_cdf(-(b0 + slope * tp) / rt)
    # the product exp(-2 b0 slope) * Phi(.) is formed in log space so that a
    # large negative slope does not overflow before the tiny Phi multiplies it
    with np.errstate(divide="ignore"):
        log_second = -2.0 * b0 * slope + np.log(std_normal_cdf((slope * tp - b0) / rt))
    out[pos] = first + np.exp(log_second)
    return _scalar(out)


def ig_cdf(b0, t):
    """``2 Phi(-b0 / sqrt t)``, the reflection-principle law of the level-``b0`` hit."""
    return bl_cdf(b0, 0.0, t)


@dataclass(frozen=True)
class ClosedFormDensity:
    """Exact FPT law for a constant or linear boundary."""

    boundary_kind: BoundaryKind
    params: tuple

    def __post_init__(self):
        if self.boundary_kind not in (BoundaryKind.CONSTANT, BoundaryKind.LINEAR):
            raise ValidationError("closed forms exist only for constant and linear boundaries")
        if self.params[0] <= 0:
            raise ValidationError("b0 must be positive")

    @property
    def slope(self) -> float:
        return self.params[1] if self.boundary_kind is BoundaryKind.LINEAR else 0.0

    def density(self, s):
        return bl_density(self.params[0], self.slope, s)

    def cdf(self, t):
        return bl_cdf(self.params[0], self.slope, t)

    def total_mass(self) -> float:
        """``P(tau < inf)``."""
        return float(np.exp(-2.0 * self.params[0] * max(self.slope, 0.0)))


def closed_form_for(boundary: Boundary) -> ClosedFormDensity:
    if boundary.kind in (BoundaryKind.CONSTANT, BoundaryKind.LINEAR):
        return ClosedFormDensity(boundary.kind, tuple(boundary.params))
    raise ValidationError(f"no closed form for boundary kind '{boundary.kind.value}'")
