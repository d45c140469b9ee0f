"""Active-set nonnegative least squares (Lawson & Hanson)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lstsq

from .errors import ConvergenceError

__all__ = ["NnlsResult", "nnls"]


@dataclass(frozen=True)
class NnlsResult:
    x: np.ndarray
    rnorm: float
    iterations: int
    passive: np.ndarray


def _ls(A, b, passive):
    z = np.zeros(A.shape[1])
    if passive.any():
        z[passive] = lstsq(A[:, passive], b, lapack_driver="gelsy", check_finite=False)[0]
    return z


def _stalled(A, b, x, P, it, max_iter):
    return ConvergenceError(
        f"nnls did not converge in {max_iter} iterations",
        iterations=it, passive_set_size=int(P.sum()),
        residual_norm=float(np.linalg.norm(A @ x - b)),
    )


def nnls(A, b, max_iter=None, tol=None, passive=None) -> NnlsResult:
    """Solve ``argmin ||A x - b||_2`` subject to ``x >= 0``.

    Parameters
    ----------
    A : (m, n) array
    b : (m,) array
    max_iter : int, optional
        Cap on inner plus outer iterations, default ``20 n``.
    tol : float, optional
        Dual-feasibility tolerance on the column-normalised problem, default
        0.  Stiff regularised systems have a nearly flat objective, so even a
        gradient of order ``eps`` can leave a large gap in the residual; the
        rejection of entering columns that are numerically dependent on the
        support is what keeps a zero tolerance from cycling.
    passive : (n,) bool array, optional
        Warm-start guess of the support.  Entries whose restricted
        least-squares coefficient is not positive are dropped before the main
        loop, so any guess is admissible.

    Ties in the entering variable resolve to the lowest index, so the result
    is deterministic.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` is exhausted.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.shape[0]:
        raise ValueError("incompatible shapes for nnls")
    m, n = A.shape
    if max_iter is None:
        max_iter = 20 * n
    # x >= 0 is invariant under positive column scaling; unit columns keep the
    # dual tolerance meaningful when column norms span many decades
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    A = A / norms
    if tol is None:
        tol = 0.0

    P = np.zeros(n, dtype=bool) if passive is None else np.array(passive, dtype=bool)
    x = np.zeros(n)
    it = 0
    while P.any():
        z = _ls(A, b, P)
        if np.all(z[P] > 0):
            x = z
            break
        P &= z > 0
        it += 1

    w = A.T @ (b - A @ x)
    rnorm = float(np.linalg.norm(A @ x - b))
    floor = 8.0 * np.finfo(float).eps * float(np.linalg.norm(b))
    rejected = np.zeros(n, dtype=bool)
    while True:
        cand = ~P & ~rejected & (w > tol)
        if not cand.any():
            break
        if it >= max_iter:
            raise _stalled(A, b, x, P, it, max_iter)
        # np.argmax returns the first maximiser: lowest index wins ties
        j = int(np.argmax(np.where(cand, w, -np.inf)))
        P[j] = True
        it += 1
        z = _ls(A, b, P)
        if z[j] <= 0 or np.linalg.norm(A @ z - b) >= rnorm - floor:
            # entering column is numerically dependent on the support or
            # buys no decrease above rounding level
            P[j] = False
            rejected[j] = True
            continue
        while not np.all(z[P] > 0):
            it += 1
            blocking = P & (z <= 0)
            gap = x[blocking] - z[blocking]
            step = np.min(np.where(gap > 0, x[blocking] / np.where(gap > 0, gap, 1.0), 0.0))
            x = x + step * (z - x)
            P &= x > 0
            x[~P] = 0.0
            if it >= max_iter:
                raise _stalled(A, b, x, P, it, max_iter)
            z = _ls(A, b, P)
        x = z
        rejected[:] = False
        w = A.T @ (b - A @ x)
        rnorm = float(np.linalg.norm(A @ x - b))

    return NnlsResult(x / norms, rnorm, it, P.copy())
