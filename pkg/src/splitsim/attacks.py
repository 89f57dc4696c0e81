"""Adversarial scoring of communicated gradients and the leak-AUC metric.

A scoring function maps a per-example gradient row to a real score; the
leak AUC is the ROC AUC of those scores against the hidden labels,
evaluated per batch.  0.5 means the scorer learns nothing, 1.0 means the
labels are fully recovered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "UndefinedAUCError",
    "roc_auc",
    "norm_score",
    "cosine_score",
    "select_oracle_positive",
    "NormScorer",
    "CosineScorer",
    "leak_auc",
    "quantile",
]


class UndefinedAUCError(ValueError):
    """Raised when a batch contains only one class, so no AUC exists."""


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """ROC AUC as the Mann-Whitney statistic with midrank tie handling.

    Equals P(score+ > score-) + 0.5 P(score+ = score-) over all
    positive-negative pairs, i.e. the area under the empirical ROC curve
    with trapezoidal ties.  Invariant under strictly increasing score
    transforms.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or scores.shape != labels.shape:
        raise ValueError("scores and labels must be equal-length vectors")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = scores.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC undefined for a single-class batch")
    # midranks: average rank over each run of tied values (1-based)
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    cum = np.cumsum(counts)
    midranks = cum - (counts - 1) / 2.0
    ranks = midranks[inverse]
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def norm_score(g: np.ndarray) -> float:
    """Euclidean norm of a gradient row."""
    return float(np.linalg.norm(g))


def cosine_score(g: np.ndarray, g_plus: np.ndarray) -> float:
    """Cosine similarity against an oracle positive gradient."""
    ng = np.linalg.norm(g)
    np_ = np.linalg.norm(g_plus)
    if ng == 0.0 or np_ == 0.0:
        raise ValueError("cosine score undefined for a zero-norm vector")
    return float(np.dot(g, g_plus) / (ng * np_))


def select_oracle_positive(
    clean_gradients: np.ndarray, labels: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Uniformly random positive-class row of the unperturbed gradients."""
    labels = np.asarray(labels)
    pos_idx = np.flatnonzero(labels == 1)
    if pos_idx.size == 0:
        raise UndefinedAUCError("no positive example in batch")
    return np.array(clean_gradients[rng.choice(pos_idx)], dtype=np.float64)


@dataclass(frozen=True)
class NormScorer:
    """Norm attack: score = ||g||_2."""

    def scores(self, gradients: np.ndarray) -> np.ndarray:
        return np.linalg.norm(gradients, axis=1)


@dataclass(frozen=True)
class CosineScorer:
    """Direction attack with an oracle clean positive gradient.

    Zero-norm rows score 0 (uninformative) rather than erroring out.
    """

    g_plus: np.ndarray

    def scores(self, gradients: np.ndarray) -> np.ndarray:
        np_ = np.linalg.norm(self.g_plus)
        if np_ == 0.0:
            raise ValueError("oracle gradient must be nonzero")
        norms = np.linalg.norm(gradients, axis=1)
        out = np.zeros(gradients.shape[0])
        nz = norms > 0.0
        out[nz] = (gradients[nz] @ self.g_plus) / (norms[nz] * np_)
        return out


def leak_auc(gradients: np.ndarray, labels: np.ndarray, scorer) -> float:
    """ROC AUC of the scorer applied rowwise to a gradient batch.

    The scorer sees the (possibly perturbed) gradients; a cosine
    scorer's oracle must come from the clean ones.
    """
    return roc_auc(scorer.scores(np.asarray(gradients, dtype=np.float64)), labels)


def quantile(series, q: float) -> float:
    """Linear-interpolation empirical quantile of a nonempty series."""
    series = np.asarray(series, dtype=np.float64)
    if series.size == 0:
        raise ValueError("quantile of an empty series")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q!r}")
    return float(np.quantile(series, q))
