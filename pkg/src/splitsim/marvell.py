"""Optimal noise-covariance machinery for the marvell mechanism.

Given a batch of per-example cut-layer gradients with labels, fit
class-conditional spherical Gaussians, solve the 4-variable eigenvalue
problem that minimizes the symmetrized KL divergence between the two
perturbed class distributions under a noise power budget, and turn the
solution into factored covariances plus a privacy certificate (the
achieved symmetrized KL, the implied worst-case attack-AUC upper bound,
and a total-variation upper bound).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .numeric import StructuredCovariance

VARIANCE_FLOOR = 1e-12


class SingleClassBatchError(ValueError):
    """Batch statistics need both classes present."""


@dataclass(frozen=True)
class BatchStats:
    """MLE-fitted class-conditional spherical Gaussian parameters."""

    p: float  # positive fraction of the batch
    pos_mean: np.ndarray
    neg_mean: np.ndarray
    v: float  # positive-class per-coordinate variance
    u: float  # negative-class per-coordinate variance
    delta_g: np.ndarray  # pos_mean - neg_mean
    delta_norm_sq: float
    d: int
    B: int


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-8  # relative objective decrease per sweep
    max_sweeps: int = 200


@dataclass(frozen=True)
class LambdaSolution:
    """Eigenvalues of the optimal noise covariances.

    lam1_* is the eigenvalue along the class-mean difference, lam2_*
    the shared eigenvalue of the orthogonal complement.
    """

    lam1_pos: float
    lam2_pos: float
    lam1_neg: float
    lam2_neg: float
    objective_value: float
    converged: bool
    sweeps_used: int


@dataclass(frozen=True)
class PrivacyCertificate:
    sum_kl: float
    auc_bound: float
    tv_bound: float
    bound_valid: bool  # sum_kl < 4, i.e. the AUC bound is non-vacuous


def estimate_stats(g: np.ndarray, labels: np.ndarray) -> BatchStats:
    """Spherical-Gaussian MLE of both classes from one gradient batch."""
    g = np.asarray(g, dtype=np.float64)
    labels = np.asarray(labels)
    if g.ndim != 2 or g.shape[0] != labels.shape[0]:
        raise ValueError("g must be (B, d) with one label per row")
    B, d = g.shape
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = B - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassBatchError("both classes must be present")
    pos_mean = g[pos].mean(axis=0)
    neg_mean = g[~pos].mean(axis=0)
    v = float(((g[pos] - pos_mean) ** 2).sum() / (d * n_pos))
    u = float(((g[~pos] - neg_mean) ** 2).sum() / (d * n_neg))
    delta = pos_mean - neg_mean
    return BatchStats(
        p=n_pos / B,
        pos_mean=pos_mean,
        neg_mean=neg_mean,
        v=v,
        u=u,
        delta_g=delta,
        delta_norm_sq=float(delta @ delta),
        d=d,
        B=B,
    )


def power_budget(s: float, stats: BatchStats) -> float:
    """Noise power cap expressed relative to the class-mean gap."""
    if s <= 0:
        raise ValueError(f"s must be > 0, got {s!r}")
    return s * stats.delta_norm_sq


def objective(lams, stats: BatchStats) -> float:
    """4-variable ratio objective at (lam1_pos, lam2_pos, lam1_neg, lam2_neg)."""
    l11, l21, l10, l20 = (float(x) for x in lams)
    u = max(stats.u, VARIANCE_FLOOR)
    v = max(stats.v, VARIANCE_FLOOR)
    return float(
        _kernels.objective4(l11, l21, l10, l20, float(stats.d), u, v, stats.delta_norm_sq)
    )


def solve(stats: BatchStats, P: float, settings: SolverSettings = SolverSettings()) -> LambdaSolution:
    """Minimize the objective over the power hyperplane.

    Applies the zero rule for the orthogonal eigenvalue (positive class
    when u < v, negative otherwise), restricts to the active power
    constraint, and coordinate-descends with golden-section line
    searches until the per-sweep relative decrease drops below
    settings.tol.
    """
    if P < 0:
        raise ValueError(f"P must be >= 0, got {P!r}")
    pin_pos = stats.u < stats.v  # pins lam2_pos; else lam2_neg
    u = max(stats.u, VARIANCE_FLOOR)
    v = max(stats.v, VARIANCE_FLOOR)
    lam, obj, converged, sweeps = _kernels.solve_lambdas(
        float(stats.d),
        u,
        v,
        float(stats.delta_norm_sq),
        float(stats.p),
        float(P),
        float(settings.tol),
        int(settings.max_sweeps),
        bool(pin_pos),
    )
    return LambdaSolution(
        lam1_pos=float(lam[0]),
        lam2_pos=float(lam[1]),
        lam1_neg=float(lam[2]),
        lam2_neg=float(lam[3]),
        objective_value=float(obj),
        converged=bool(converged),
        sweeps_used=int(sweeps),
    )


def build_covariances(sol: LambdaSolution, stats: BatchStats):
    """Factored optimal covariances (positive class, negative class).

    Each is (lam1 - lam2) along the unit class-mean difference plus
    lam2 times the identity; the dense d x d matrix is never formed.
    """
    norm = np.sqrt(stats.delta_norm_sq)
    if norm == 0.0:
        raise ValueError("covariance direction undefined for zero class-mean gap")
    direction = stats.delta_g / norm
    pos = StructuredCovariance(
        direction=direction,
        along_var=max(sol.lam1_pos - sol.lam2_pos, 0.0),
        iso_var=max(sol.lam2_pos, 0.0),
    )
    neg = StructuredCovariance(
        direction=direction,
        along_var=max(sol.lam1_neg - sol.lam2_neg, 0.0),
        iso_var=max(sol.lam2_neg, 0.0),
    )
    return pos, neg


def sum_kl(sol: LambdaSolution, stats: BatchStats) -> float:
    """Symmetrized KL between the two perturbed class distributions.

    The ratio objective equals the trace-plus-quadratic expansion of the
    symmetrized Gaussian KL whose log-determinant terms cancel, so the
    divergence itself is objective/2 - d.
    """
    lams = (sol.lam1_pos, sol.lam2_pos, sol.lam1_neg, sol.lam2_neg)
    return objective(lams, stats) / 2.0 - stats.d


def noise_power(sol: LambdaSolution, stats: BatchStats) -> float:
    """Class-weighted total noise variance implied by the solution."""
    d = stats.d
    return stats.p * (sol.lam1_pos + (d - 1) * sol.lam2_pos) + (1.0 - stats.p) * (
        sol.lam1_neg + (d - 1) * sol.lam2_neg
    )


def auc_upper_bound(eps: float) -> float:
    """Worst-case attack AUC implied by a symmetrized KL of eps.

    0.5 + sqrt(eps)/2 - eps/8 for eps < 4; the bound is vacuous (1.0)
    beyond that.
    """
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps!r}")
    if eps >= 4.0:
        return 1.0
    return 0.5 + np.sqrt(eps) / 2.0 - eps / 8.0


def tv_upper_bound(eps: float) -> float:
    """Total-variation bound sqrt(eps)/2, capped at 1."""
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps!r}")
    return float(min(0.5 * np.sqrt(eps), 1.0))


def make_certificate(sol: LambdaSolution, stats: BatchStats) -> PrivacyCertificate:
    eps = sum_kl(sol, stats)
    eps = max(eps, 0.0)  # guard float fuzz at the optimum
    return PrivacyCertificate(
        sum_kl=eps,
        auc_bound=auc_upper_bound(eps),
        tv_bound=tv_upper_bound(eps),
        bound_valid=eps < 4.0,
    )
