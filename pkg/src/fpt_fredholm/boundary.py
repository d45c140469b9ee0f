"""Upper boundaries b(t) for the first passage problem of standard Brownian motion.

A :class:`Boundary` couples the function itself with the growth metadata the
integral equation relies on: constants ``M, m`` with ``b(t) <= M + m t``, an
asymptotic slope ``d >= limsup b(t)/t`` and a Lipschitz constant ``L`` at the
origin.  The metadata is supplied (or defaulted) at construction and checked
numerically by :func:`certify_growth`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, RangeError, ValidationError

__all__ = [
    "Boundary",
    "BoundaryKind",
    "CertResult",
    "certify_growth",
    "load_boundary",
]

_LIPSCHITZ_SAFETY = 1.1
_LIPSCHITZ_SAMPLES = 4001
# floor keeps L strictly positive for flat boundaries
_LIPSCHITZ_FLOOR = 1e-12


class BoundaryKind(str, Enum):
    CONSTANT = "constant"
    LINEAR = "linear"
    SQRT_SHIFT = "sqrt_shift"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class Boundary:
    """Continuously differentiable upper boundary with growth certificates.

    Use the constructors :meth:`constant`, :meth:`linear`, :meth:`sqrt_shift`
    and :meth:`tabulated` rather than the raw initializer.

    Attributes
    ----------
    kind : BoundaryKind
    params : tuple
        ``(b0,)`` for constant, ``(b0, slope)`` for linear, ``(a, r)`` for
        ``b(t) = a + r sqrt(t + 1)``, and the flattened ``(t, b)`` node pairs
        for tabulated boundaries.
    growth_M, growth_m : float
        Certificate ``b(t) <= growth_M + growth_m * t``.
    growth_d : float
        Certificate ``limsup b(t)/t <= growth_d``; collocation needs ``c > growth_d``.
    lipschitz_L : float or None
        Certificate ``|b(t) - b(0)| <= L t``.  ``None`` means "derive it from
        the derivative on the horizon in use", see :meth:`lipschitz_constant`.
    """

    kind: BoundaryKind
    params: tuple
    growth_M: float
    growth_m: float
    growth_d: float = 0.0
    lipschitz_L: float | None = None
    _interp: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.b0 <= 0 or not np.isfinite(self.b0):
            raise ValidationError(f"b(0) must be positive, got {self.b0!r}")
        if self.growth_d < 0:
            raise ValidationError("growth_d must be >= 0")
        if self.growth_d > self.growth_m + 1e-15:
            raise ValidationError(
                f"growth_d={self.growth_d} exceeds growth_m={self.growth_m}"
            )
        if self.lipschitz_L is not None and not self.lipschitz_L > 0:
            raise ValidationError("lipschitz_L must be positive")

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, b0, *, M=None, m=0.0, d=0.0, L=None):
        b0 = float(b0)
        return cls(BoundaryKind.CONSTANT, (b0,), _default(M, b0), float(m), float(d), L)

    @classmethod
    def linear(cls, b0, slope, *, M=None, m=None, d=None, L=None):
        """``b(t) = b0 + slope t``.  Defaults ``M = b0`` and ``m = d = max(slope, 0)``;
        a user ``m`` also caps the default ``d`` (certify_growth then reports
        an ``m`` below the slope instead of construction failing)."""
        b0, slope = float(b0), float(slope)
        pos = max(slope, 0.0)
        m = _default(m, pos)
        return cls(
            BoundaryKind.LINEAR,
            (b0, slope),
            _default(M, b0),
            m,
            _default(d, min(pos, m)),
            L,
        )

    @classmethod
    def sqrt_shift(cls, a, r, *, M=None, m=None, d=0.0, L=None):
        """``b(t) = a + r sqrt(t + 1)``; default certificate uses sqrt(t+1) <= 1 + t/2."""
        a, r = float(a), float(r)
        return cls(
            BoundaryKind.SQRT_SHIFT,
            (a, r),
            _default(M, a + r),
            _default(m, max(r, 0.0) / 2.0),
            float(d),
            L,
        )

    @classmethod
    def tabulated(cls, nodes, *, M=None, m=0.0, d=0.0, L=None):
        """Boundary given by ``(t, b)`` nodes, interpolated by a monotone cubic."""
        arr = np.asarray(nodes, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
            raise ValidationError("tabulated boundary needs at least two (t, b) pairs")
        t, b = arr[:, 0], arr[:, 1]
        if t[0] != 0.0:
            raise ValidationError("tabulated boundary must start at t = 0")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("tabulated nodes must be strictly increasing in t")
        interp = PchipInterpolator(t, b, extrapolate=False)
        return cls(
            BoundaryKind.TABULATED,
            tuple(arr.ravel()),
            _default(M, float(b.max())),
            float(m),
            float(d),
            L,
            interp,
        )

    @classmethod
    def from_dict(cls, data: dict) -> Boundary:
        """Build from the JSON boundary file layout.

        ``{"kind": "linear", "b0": 1.0, "slope": 0.5, "growth": {"M": .., "m": .., "d": .., "L": ..}}``
        """
        try:
            kind = BoundaryKind(data["kind"])
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"unknown or missing boundary kind: {data.get('kind')!r}") from exc
        growth = dict(data.get("growth") or {})
        unknown = set(growth) - {"M", "m", "d", "L"}
        if unknown:
            raise ValidationError(f"unknown growth keys: {sorted(unknown)}")
        try:
            if kind is BoundaryKind.CONSTANT:
                return cls.constant(data["b0"], **growth)
            if kind is BoundaryKind.LINEAR:
                return cls.linear(data["b0"], data["slope"], **growth)
            if kind is BoundaryKind.SQRT_SHIFT:
                return cls.sqrt_shift(data["a"], data["r"], **growth)
            return cls.tabulated(data["nodes"], **growth)
        except KeyError as exc:
            raise ValidationError(f"boundary '{kind.value}' is missing field {exc}") from exc

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind.value}
        if self.kind is BoundaryKind.CONSTANT:
            out["b0"] = self.params[0]
        elif self.kind is BoundaryKind.LINEAR:
            out["b0"], out["slope"] = self.params
        elif self.kind is BoundaryKind.SQRT_SHIFT:
            out["a"], out["r"] = self.params
        else:
            out["nodes"] = self.nodes.tolist()
        growth = {"M": self.growth_M, "m": self.growth_m, "d": self.growth_d}
        if self.lipschitz_L is not None:
            growth["L"] = self.lipschitz_L
        out["growth"] = growth
        return out

    # -- evaluation -------------------------------------------------------

    @property
    def b0(self) -> float:
        if self.kind is BoundaryKind.SQRT_SHIFT:
            a, r = self.params
            return a + r
        return float(self.params[1] if self.kind is BoundaryKind.TABULATED else self.params[0])

    @property
    def nodes(self) -> np.ndarray:
        if self.kind is not BoundaryKind.TABULATED:
            raise AttributeError("only tabulated boundaries have nodes")
        return np.asarray(self.params, dtype=float).reshape(-1, 2)

    @property
    def t_max(self) -> float:
        """Largest time at which the boundary can be evaluated."""
        if self.kind is BoundaryKind.TABULATED:
            return float(self.params[-2])
        return np.inf

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(np.isnan(t)):
            raise DomainError("boundary evaluated at negative time")
        if self.kind is BoundaryKind.TABULATED and np.any(t > self.t_max):
            raise RangeError(
                f"tabulated boundary defined on [0, {self.t_max}], asked for t={np.max(t)}"
            )
        return t

    def eval(self, t):
        """Boundary value b(t); scalar in, float out, array in, array out."""
        t = self._check(t)
        kind = self.kind
        if kind is BoundaryKind.CONSTANT:
            out = np.full_like(t, self.params[0])
        elif kind is BoundaryKind.LINEAR:
            b0, slope = self.params
            out = b0 + slope * t
        elif kind is BoundaryKind.SQRT_SHIFT:
            a, r = self.params
            out = a + r * np.sqrt(t + 1.0)
        else:
            out = np.asarray(self._interp(t), dtype=float)
            # pin exact value at the origin
            out = np.where(t == 0.0, self.b0, out)
        return float(out) if out.ndim == 0 else out

    def deriv(self, t):
        """Derivative b'(t) (of the interpolant for tabulated boundaries)."""
        t = self._check(t)
        kind = self.kind
        if kind is BoundaryKind.CONSTANT:
            out = np.zeros_like(t)
        elif kind is BoundaryKind.LINEAR:
            out = np.full_like(t, self.params[1])
        elif kind is BoundaryKind.SQRT_SHIFT:
            r = self.params[1]
            out = 0.5 * r / np.sqrt(t + 1.0)
        else:
            out = np.asarray(self._interp.derivative()(t), dtype=float)
        return float(out) if out.ndim == 0 else out

    def eval_extended(self, t):
        """Like :meth:`eval` but continues tabulated boundaries past the last
        node with slope ``growth_d``.  Only used for tail models beyond the
        solver horizon."""
        if self.kind is not BoundaryKind.TABULATED:
            return self.eval(t)
        t = np.asarray(t, dtype=float)
        inside = np.minimum(t, self.t_max)
        out = np.asarray(self.eval(inside)) + self.growth_d * np.maximum(t - self.t_max, 0.0)
        return float(out) if out.ndim == 0 else out

    def lipschitz_constant(self, horizon: float) -> float:
        """Certified ``L`` if supplied, else 1.1 * max |b'| sampled on [0, horizon]."""
        if self.lipschitz_L is not None:
            return float(self.lipschitz_L)
        horizon = min(horizon, self.t_max)
        ts = np.linspace(0.0, horizon, _LIPSCHITZ_SAMPLES)
        slope = float(np.max(np.abs(self.deriv(ts))))
        return max(_LIPSCHITZ_SAFETY * slope, _LIPSCHITZ_FLOOR)


def _default(value, fallback):
    return float(fallback if value is None else value)


def load_boundary(path) -> Boundary:
    """Read a boundary specification JSON file."""
    with open(Path(path)) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: boundary file must hold a JSON object")
    return Boundary.from_dict(data)


@dataclass(frozen=True)
class CertResult:
    passed: bool
    growth_ok: bool
    lipschitz_ok: bool
    first_violation: float | None = None
    violated: str | None = None
    lipschitz_L: float | None = None


def certify_growth(boundary: Boundary, horizon: float, samples: int = 2001,
                   rtol: float = 1e-12) -> CertResult:
    """Check ``b(t) <= M + m t`` and ``|b(t) - b0| <= L t`` on a dense grid.

    Failure is reported in the result, with the first violating time, rather
    than raised.
    """
    if not horizon > 0:
        raise ValidationError("horizon must be positive")
    if samples < 2:
        raise ValidationError("need at least two samples")
    horizon = min(horizon, boundary.t_max)
    ts = np.linspace(0.0, horizon, samples)
    bs = np.asarray(boundary.eval(ts))
    slack = rtol * np.maximum(1.0, np.abs(bs))

    growth_bad = bs > boundary.growth_M + boundary.growth_m * ts + slack
    L = boundary.lipschitz_constant(horizon)
    lip_bad = np.abs(bs - boundary.b0) > L * ts + slack

    first, which = None, None
    for name, bad in (("growth", growth_bad), ("lipschitz", lip_bad)):
        if bad.any():
            t_bad = float(ts[np.argmax(bad)])
            if first is None or t_bad < first:
                first, which = t_bad, name
    return CertResult(
        passed=first is None,
        growth_ok=not growth_bad.any(),
        lipschitz_ok=not lip_bad.any(),
        first_violation=first,
        violated=which,
        lipschitz_L=L,
    )
