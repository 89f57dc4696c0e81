"""Hot inner loop of the noise-covariance optimizer.

The 4-variable constrained minimization runs once per protected training
iteration, and its golden-section coordinate descent is scalar-loop
bound, so the kernel is numba-jitted by default.  Setting the
environment variable ``SPLITSIM_NO_NUMBA=1`` (or running without numba
installed) selects a pure-Python fallback that executes the identical
code path; results are bitwise identical because no fastmath is used.

``benchmarks/solver_bench.py`` times both paths.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("SPLITSIM_NO_NUMBA", "") != "1"

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def _maybe_jit(fn):
    if USE_NUMBA:
        return njit(cache=True)(fn)
    return fn


@_maybe_jit
def objective4(l11, l21, l10, l20, d, u, v, dsq):
    """Ratio objective of the 4-variable problem.

    (l11, l21) are the positive class's along/orthogonal eigenvalues,
    (l10, l20) the negative class's; u, v must already carry the
    variance floor so every denominator is positive.
    """
    return (
        (d - 1.0) * ((l20 + u) / (l21 + v) + (l21 + v) / (l20 + u))
        + (l10 + u + dsq) / (l11 + v)
        + (l11 + v + dsq) / (l10 + u)
    )


@_maybe_jit
def _segment_bounds(lam, i, j, w, R):
    """Feasible t-range for the move lam[i]=t, lam[j]=(R - w[i] t)/w[j].

    Intersects t >= 0, lam[j] >= 0 and the two eigenvalue-ordering
    constraints (lam[1] <= lam[0], lam[3] <= lam[2]).
    """
    lo = 0.0
    hi = R / w[i]
    # constraint rows gamma . lam <= 0
    gammas = np.zeros((2, 4))
    gammas[0, 0] = -1.0
    gammas[0, 1] = 1.0
    gammas[1, 2] = -1.0
    gammas[1, 3] = 1.0
    for c in range(2):
        gi = gammas[c, i]
        gj = gammas[c, j]
        alpha = gi - gj * w[i] / w[j]
        beta = gj * R / w[j]
        for k in range(4):
            if k != i and k != j:
                beta += gammas[c, k] * lam[k]
        if alpha > 1e-300:
            hi = min(hi, -beta / alpha)
        elif alpha < -1e-300:
            lo = max(lo, -beta / alpha)
    return lo, hi


@_maybe_jit
def _line_min(lam, i, j, w, R, d, u, v, dsq, tol):
    """Golden-section minimization over the feasible segment of (i, j)."""
    lo, hi = _segment_bounds(lam, i, j, w, R)
    if hi <= lo:
        t = max(lo, min(hi, lo))
        lam[i] = t
        lam[j] = max((R - w[i] * t) / w[j], 0.0)
        return
    width = hi - lo
    tol_w = max(tol * width, 1e-10)
    a = lo
    b = hi
    c = a + _INVPHI2 * width
    e = a + _INVPHI * width
    lam[i] = c
    lam[j] = max((R - w[i] * c) / w[j], 0.0)
    fc = objective4(lam[0], lam[1], lam[2], lam[3], d, u, v, dsq)
    lam[i] = e
    lam[j] = max((R - w[i] * e) / w[j], 0.0)
    fe = objective4(lam[0], lam[1], lam[2], lam[3], d, u, v, dsq)
    while b - a > tol_w:
        if fc < fe:
            b = e
            e = c
            fe = fc
            c = a + _INVPHI2 * (b - a)
            lam[i] = c
            lam[j] = max((R - w[i] * c) / w[j], 0.0)
            fc = objective4(lam[0], lam[1], lam[2], lam[3], d, u, v, dsq)
        else:
            a = c
            c = e
            fc = fe
            e = a + _INVPHI * (b - a)
            lam[i] = e
            lam[j] = max((R - w[i] * e) / w[j], 0.0)
            fe = objective4(lam[0], lam[1], lam[2], lam[3], d, u, v, dsq)
    t = 0.5 * (a + b)
    lam[i] = t
    lam[j] = max((R - w[i] * t) / w[j], 0.0)


@_maybe_jit
def solve_lambdas(d, u, v, dsq, p, P, tol, max_sweeps, pin_pos):
    """Coordinate descent on the power hyperplane.

    One orthogonal eigenvalue is pinned to zero (lam[1] when pin_pos,
    else lam[3]); the remaining variables are swept in round-robin: fix
    one, line-search the other two along the feasible segment of the
    hyperplane p*l11 + p(d-1)*l21 + (1-p)*l10 + (1-p)(d-1)*l20 = P.

    Returns (lam[4], objective, converged, sweeps_used).
    """
    lam = np.zeros(4)
    w = np.empty(4)
    w[0] = p
    w[1] = p * (d - 1.0)
    w[2] = 1.0 - p
    w[3] = (1.0 - p) * (d - 1.0)

    if P <= 0.0:
        obj = objective4(0.0, 0.0, 0.0, 0.0, d, u, v, dsq)
        return lam, obj, True, 0

    if d == 1.0:
        # orthogonal eigenvalues have zero power weight and no objective
        # term; the problem is a single segment over (lam[0], lam[2])
        lam[0] = P / (2.0 * w[0])
        lam[2] = P / (2.0 * w[2])
        _line_min(lam, 0, 2, w, P, d, u, v, dsq, tol)
        obj = objective4(lam[0], lam[1], lam[2], lam[3], d, u, v, dsq)
        return lam, obj, True, 1

    if pin_pos:
        free = np.array([0, 2, 3], dtype=np.int64)
    else:
        free = np.array([0, 1, 2], dtype=np.int64)

    for n in range(3):
        lam[free[n]] = (P / 3.0) / w[free[n]]

    prev = objective4(lam[0], lam[1], lam[2], lam[3], d, u, v, dsq)
    converged = False
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        for n in range(3):
            f_idx = free[n]
            i = free[(n + 1) % 3]
            j = free[(n + 2) % 3]
            if i > j:
                i, j = j, i
            R = P - w[f_idx] * lam[f_idx]
            if R < 0.0:
                R = 0.0
            _line_min(lam, i, j, w, R, d, u, v, dsq, tol)
        cur = objective4(lam[0], lam[1], lam[2], lam[3], d, u, v, dsq)
        if prev - cur <= tol * max(abs(prev), 1e-300):
            converged = True
            break
        prev = cur

    # land exactly on the hyperplane: absorb float drift into the
    # free variable carrying the most power
    drift = P - (w[0] * lam[0] + w[1] * lam[1] + w[2] * lam[2] + w[3] * lam[3])
    best = free[0]
    for n in range(1, 3):
        if w[free[n]] * lam[free[n]] > w[best] * lam[best]:
            best = free[n]
    lam[best] = max(lam[best] + drift / w[best], 0.0)

    obj = objective4(lam[0], lam[1], lam[2], lam[3], d, u, v, dsq)
    return lam, obj, converged, sweeps
