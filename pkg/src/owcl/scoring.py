"""Similarity scoring and the known-vs-open verdict.

A sample's per-class score is the dot product of its projected features with
that class's decision column (the ridge-decoded prototype scaled by the
class count, so training scores sit near 1 for every class). The sample is
declared open when its best score falls strictly below ``threshold_ratio *
train_score_mean``; a score exactly at the cutoff is known. Argmax ties
resolve to the lowest class id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CalibrationError,
    DimensionMismatchError,
    NoClassesError,
    UncalibratedError,
)
from .projection import project
from .state import KnowledgeState, decision_weights

KNOWN = "known"
OPEN = "open"


@dataclass(frozen=True)
class ScoredSample:
    """Per-class scores plus the argmax and the verdict for one sample."""

    scores: np.ndarray  # (K,), aligned with class_ids
    class_ids: tuple[int, ...]
    best_class: int
    best_score: float
    verdict: str  # KNOWN or OPEN


def score(h: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-class scores of one projected sample: scores[y] = h . weights[:, y]."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1 or h.shape[0] != weights.shape[0]:
        raise DimensionMismatchError(
            f"sample shape {h.shape} incompatible with weights {weights.shape}"
        )
    return h @ weights


def score_batch(h: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """(n, K) score matrix for a batch of projected samples."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != weights.shape[0]:
        raise DimensionMismatchError(
            f"batch shape {h.shape} incompatible with weights {weights.shape}"
        )
    return h @ weights


def best_of(scores: np.ndarray, class_ids: list[int]) -> tuple[int, float]:
    """Argmax with ties resolved to the lowest class id."""
    best = float(np.max(scores))
    tied = [class_ids[i] for i in np.flatnonzero(scores == best)]
    return min(tied), best


def _scored(scores: np.ndarray, class_ids: list[int], cutoff: float) -> ScoredSample:
    best_class, best_score = best_of(scores, class_ids)
    verdict = OPEN if best_score < cutoff else KNOWN
    return ScoredSample(scores, tuple(class_ids), best_class, best_score, verdict)


def classify(x: np.ndarray, state: KnowledgeState) -> ScoredSample:
    """Project a raw sample, score it against the decision weights, and
    apply the calibrated cutoff."""
    if state.num_classes == 0:
        raise NoClassesError("classify needs at least one trained class")
    if not state.calibrated:
        raise UncalibratedError("threshold was never calibrated for this state")
    x = np.asarray(x, dtype=np.float64)
    h = project(x[np.newaxis, :], state.projection)[0]
    scores = score(h, decision_weights(state))
    cutoff = state.threshold_ratio * state.train_score_mean
    return _scored(scores, state.class_ids, cutoff)


def classify_ablated(
    x: np.ndarray, state: KnowledgeState, percentile: float = 0.05
) -> ScoredSample:
    """Classify with a fixed percentile of training best-scores as the cutoff.

    Scores are identical to classify(); only the cutoff differs. This is the
    max-score baseline used to quantify what threshold calibration adds.
    """
    if state.num_classes == 0:
        raise NoClassesError("classify needs at least one trained class")
    if len(state.train_scores) == 0:
        raise CalibrationError("no recorded training-score distribution in state")
    if not 0.0 <= percentile <= 1.0:
        raise ValueError(f"percentile must lie in [0, 1], got {percentile}")
    x = np.asarray(x, dtype=np.float64)
    h = project(x[np.newaxis, :], state.projection)[0]
    scores = score(h, decision_weights(state))
    cutoff = float(np.quantile(state.train_scores, percentile))
    return _scored(scores, state.class_ids, cutoff)


def record_training_scores(
    state: KnowledgeState, h: np.ndarray, weights: np.ndarray | None = None
) -> KnowledgeState:
    """Append the best decision-scores of a training batch to the record.

    The record backs the percentile cutoff of classify_ablated; it never
    feeds the Gram/aggregate statistics. `weights` are decode_weights
    (prototype columns); the count scaling happens here.
    """
    s = score_batch(h, decision_weights(state, weights))
    if s.shape[0] == 0:
        return state
    state.train_scores = np.concatenate([state.train_scores, s.max(axis=1)])
    return state
