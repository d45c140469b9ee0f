"""Monte Carlo estimate of the first passage law by discretely monitored paths.

Randomness comes from Philox4x32-10, a counter-based generator: the stream
of path ``p`` at step ``k`` is a pure function of ``(seed, p, k)``, so any
split of the paths over chunks or threads reproduces the sequential result
bit for bit.  Counter words are ``(block, path_lo, path_hi, stream)`` with
stream 0 feeding the Gaussian increments (two per block, Box-Muller) and
stream 1 the uniforms of the bridge test; the 64-bit seed is the key.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from .boundary import Boundary
from .errors import ValidationError

__all__ = [
    "EmpiricalFpt",
    "McConfig",
    "ks_distance",
    "philox4x32",
    "simulate",
    "simulate_paths",
    "time_grid",
    "uniform53",
]

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_LOW = np.uint64(0xFFFFFFFF)
_TWO_M53 = 1.0 / 9007199254740992.0
# skip the bridge uniform when exp(-a) < 2.3e-16, below the u53 resolution
_BRIDGE_CUTOFF = 36.0
_ESCAPED = -1.0
_CHUNK = 65536

# OpenMP first: an outdated system TBB only produces a warning when probed
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(inline="always")
def _philox(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = np.uint64(c0) * _M0
        p1 = np.uint64(c2) * _M1
        hi0 = np.uint32(p0 >> np.uint64(32))
        lo0 = np.uint32(p0 & _LOW)
        hi1 = np.uint32(p1 >> np.uint64(32))
        lo1 = np.uint32(p1 & _LOW)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = np.uint32(k0 + _W0)
        k1 = np.uint32(k1 + _W1)
    return c0, c1, c2, c3


@njit(inline="always")
def _u53(a, b):
    # in (0, 1]: never 0, so log() is safe
    return ((np.uint64(a) >> np.uint64(5)) * 67108864.0
            + (np.uint64(b) >> np.uint64(6)) + 1.0) * _TWO_M53


@njit
def _philox_one(c0, c1, c2, c3, k0, k1):
    r = _philox(np.uint32(c0), np.uint32(c1), np.uint32(c2), np.uint32(c3),
                np.uint32(k0), np.uint32(k1))
    return np.array([r[0], r[1], r[2], r[3]], dtype=np.uint32)


def philox4x32(counter, key) -> np.ndarray:
    """One Philox4x32-10 block: four uint32 words from a 4-word counter and 2-word key."""
    c = [int(v) & 0xFFFFFFFF for v in counter]
    k = [int(v) & 0xFFFFFFFF for v in key]
    if len(c) != 4 or len(k) != 2:
        raise ValidationError("philox needs a 4-word counter and a 2-word key")
    return _philox_one(c[0], c[1], c[2], c[3], k[0], k[1])


def uniform53(a: int, b: int) -> float:
    """Uniform on ``(0, 1]`` with 53 random bits from two uint32 words."""
    return ((a >> 5) * 67108864.0 + (b >> 6) + 1.0) * _TWO_M53


@njit(parallel=True, cache=True)
def _simulate(start, stop, times, bvals, k0, k1, bridge, out):
    steps = times.size - 1
    for i in prange(stop - start):
        p = start + i
        plo = np.uint32(p & 0xFFFFFFFF)
        phi = np.uint32(p >> 32)
        w = 0.0
        z1 = 0.0
        res = _ESCAPED
        for k in range(steps):
            if k % 2 == 0:
                r = _philox(np.uint32(k // 2), plo, phi, np.uint32(0), k0, k1)
                rad = math.sqrt(-2.0 * math.log(_u53(r[0], r[1])))
                ang = 2.0 * math.pi * _u53(r[2], r[3])
                z = rad * math.cos(ang)
                z1 = rad * math.sin(ang)
            else:
                z = z1
            h = times[k + 1] - times[k]
            wn = w + math.sqrt(h) * z
            if wn >= bvals[k + 1]:
                res = 0.5 * (times[k] + times[k + 1]) if bridge else times[k + 1]
                break
            if bridge:
                a = 2.0 * (bvals[k] - w) * (bvals[k + 1] - wn) / h
                if a < _BRIDGE_CUTOFF:
                    r = _philox(np.uint32(k), plo, phi, np.uint32(1), k0, k1)
                    if _u53(r[0], r[1]) < math.exp(-a):
                        res = 0.5 * (times[k] + times[k + 1])
                        break
            w = wn
        out[i] = res


@dataclass(frozen=True)
class McConfig:
    """Simulation settings.  ``seed`` is any integer in ``[0, 2**64)``."""

    n_paths: int = 1_000_000
    dt: float = 1e-3
    horizon: float = 1.0
    seed: int = 0
    bridge_correction: bool = True

    def __post_init__(self):
        if not isinstance(self.n_paths, (int, np.integer)) or self.n_paths < 1:
            raise ValidationError("n_paths must be an integer >= 1")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValidationError("dt must be positive")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValidationError("horizon must be positive")
        if self.dt > self.horizon:
            raise ValidationError("dt must not exceed the horizon")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must lie in [0, 2**64)")

    @classmethod
    def from_dict(cls, data: dict) -> McConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValidationError(f"unknown Monte Carlo config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def time_grid(dt: float, horizon: float) -> np.ndarray:
    """Monitoring times ``0, dt, 2 dt, ...`` ending exactly at ``horizon``.

    The last step is shortened when ``horizon`` is not a multiple of ``dt``.
    """
    n = math.ceil(horizon / dt - 1e-9)
    t = np.arange(n + 1, dtype=float) * dt
    t[-1] = horizon
    return t


def _threads() -> int:
    env = os.environ.get("FPT_THREADS")
    if not env:
        return numba.config.NUMBA_NUM_THREADS
    try:
        n = int(env)
    except ValueError as exc:
        raise ValidationError(f"FPT_THREADS must be an integer, got {env!r}") from exc
    return max(1, min(n, numba.config.NUMBA_NUM_THREADS))


def simulate_paths(boundary: Boundary, config: McConfig, start: int = 0,
                   stop: int | None = None, times=None) -> np.ndarray:
    """Raw crossing times of paths ``start .. stop-1``; ``-1`` marks escape.

    The result for a path depends only on the seed and its index, so any
    partition of ``[0, n_paths)`` reassembles to the same array.
    """
    stop = config.n_paths if stop is None else stop
    if not 0 <= start <= stop:
        raise ValidationError("need 0 <= start <= stop")
    t = time_grid(config.dt, config.horizon) if times is None else np.asarray(times, dtype=float)
    if t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ValidationError("monitoring times must start at 0 and increase")
    b = np.asarray(boundary.eval(t), dtype=float)
    seed = int(config.seed)
    k0, k1 = np.uint32(seed & 0xFFFFFFFF), np.uint32(seed >> 32)
    out = np.empty(stop - start)
    prev = numba.get_num_threads()
    numba.set_num_threads(_threads())
    try:
        _simulate(start, stop, t, b, k0, k1, bool(config.bridge_correction), out)
    finally:
        numba.set_num_threads(prev)
    return out


@dataclass(frozen=True)
class EmpiricalFpt:
    """Sorted crossing times in ``[0, horizon]`` plus the escape count."""

    crossing_times: np.ndarray
    n_escaped: int
    n_paths: int
    horizon: float

    def __post_init__(self):
        t = self.crossing_times
        if t.size + self.n_escaped != self.n_paths:
            raise ValidationError("crossings plus escapes must equal n_paths")
        if t.size and (t[0] < 0 or t[-1] > self.horizon or np.any(np.diff(t) < 0)):
            raise ValidationError("crossing times must be sorted within [0, horizon]")

    @classmethod
    def from_raw(cls, raw, horizon: float) -> EmpiricalFpt:
        raw = np.asarray(raw, dtype=float)
        hit = np.sort(raw[raw >= 0])
        hit.setflags(write=False)
        return cls(hit, int(raw.size - hit.size), int(raw.size), float(horizon))

    def cdf(self, t):
        """``#{crossings <= t} / n_paths`` (escaped paths never count)."""
        counts = np.searchsorted(self.crossing_times, np.asarray(t, dtype=float), side="right")
        return counts / self.n_paths

    def summary(self, quantiles=(0.05, 0.25, 0.5, 0.75, 0.95)) -> dict:
        t = self.crossing_times
        q = {str(p): (float(np.quantile(t, p)) if t.size else None) for p in quantiles}
        return {
            "n_paths": self.n_paths,
            "n_crossed": int(t.size),
            "n_escaped": self.n_escaped,
            "horizon": self.horizon,
            "p_cross_by_horizon": t.size / self.n_paths,
            "p_cross_by_1": float(self.cdf(1.0)) if self.horizon >= 1.0 else None,
            "quantiles": q,
        }


def simulate(boundary: Boundary, config: McConfig, chunk: int = _CHUNK) -> EmpiricalFpt:
    """Simulate ``config.n_paths`` paths on the grid from :func:`time_grid`.

    A path crosses in the first step ending with ``W >= b``.  With
    ``bridge_correction`` a step whose two endpoints lie below the boundary
    also counts as a crossing with the Brownian bridge probability
    ``exp(-2 d1 d2 / h)`` (boundary linearised over the step).  Crossings are
    timed at the step midpoint with the bridge and at the right end of the
    step without it.
    """
    if chunk < 1:
        raise ValidationError("chunk must be positive")
    t = time_grid(config.dt, config.horizon)
    parts = [simulate_paths(boundary, config, lo, min(lo + chunk, config.n_paths), times=t)
             for lo in range(0, config.n_paths, chunk)]
    return EmpiricalFpt.from_raw(np.concatenate(parts), config.horizon)


def ks_distance(empirical: EmpiricalFpt, cdf) -> float:
    """Kolmogorov distance between the empirical sub-distribution and ``cdf``.

    Both one-sided gaps are taken at every crossing time (value and left
    limit of the empirical step function) and at the horizon, which is the
    supremum over ``[0, horizon]`` for a continuous nondecreasing ``cdf``.
    """
    t = empirical.crossing_times
    n = empirical.n_paths
    pts = np.append(np.unique(t), empirical.horizon)
    model = np.asarray(cdf(pts), dtype=float)
    right = np.searchsorted(t, pts, side="right") / n
    left = np.searchsorted(t, pts, side="left") / n
    return float(max(np.max(np.abs(right - model)), np.max(np.abs(left - model))))
