"""Threshold-ratio calibration by ternary search.

The decision cutoff is ``r * train_score_mean``. The normalizer
``train_score_mean`` is the mean own-class decision score over every
training sample seen so far; because the per-class score sums collapse onto
the class aggregates (the sum of h . w_y over class y equals
count_y * p_y . w_y), it is computed exactly from the state with no stored
samples, and is therefore invariant to task order and batching.

The search maximizes the fraction of calibration points that land on their
correct side of the cutoff. The known side combines the pseudo-positive
surrogates with the recorded best-scores of real training samples (the
training distribution is the honest sample of what known test scores look
like, and using it leaks no test labels); the open side is the pseudo
negatives. The objective is piecewise constant, so the search keeps the
best evaluated point: ties between probes shrink the interval from both
ends, and the final midpoint is returned whenever it is at least as good as
every probe seen.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CalibrationError
from .pseudo import KNOWN_SURROGATE, CalibrationSet
from .state import KnowledgeState, decision_weights, decode_weights, prototypes_matrix


@dataclass
class SearchConfig:
    """Interval, termination width, and iteration cap for the ternary search.

    bracket_points > 2 turns on a coarse pre-pass: the objective is sampled
    at that many evenly spaced points and the shrinking loop starts around
    the best one. Piecewise-constant objectives are full of plateaus that
    can steer a pure ternary loop into a local basin; the pre-pass costs a
    constant number of evaluations and keeps the loop's iteration bound
    (the refined interval is strictly smaller than the original).
    """

    lo: float | None = None
    hi: float | None = None
    epsilon: float = 1e-3
    max_iters: int = 100
    bracket_points: int = 16

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.lo is not None and self.hi is not None and not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.bracket_points < 2:
            raise ValueError("bracket_points must be >= 2")


def training_score_mean(state: KnowledgeState, weights: np.ndarray | None = None) -> float:
    """Count-weighted mean own-class decision score of all training samples.

    `weights` are decode_weights (prototype columns); the count scaling into
    decision scores happens here.
    """
    if state.num_classes == 0 or state.total_count == 0:
        return 0.0
    protos = prototypes_matrix(state)
    per_class = np.einsum("mk,mk->k", protos, decision_weights(state, weights))
    return float(np.dot(state.class_counts, per_class) / state.total_count)


def calibration_scores(
    calib: CalibrationSet, state: KnowledgeState, weights: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Best scores of all calibration points plus their known/open tags.

    Surrogates already live in projected space, so scoring skips projection.
    The state's recorded training best-scores are appended to the known side.
    """
    if not calib.samples:
        raise CalibrationError("empty calibration set")
    z = np.stack([s.vector for s in calib.samples])
    scores = (z @ decision_weights(state, weights)).max(axis=1)
    is_known = np.array([s.tag == KNOWN_SURROGATE for s in calib.samples])
    if len(state.train_scores):
        scores = np.concatenate([scores, state.train_scores])
        is_known = np.concatenate(
            [is_known, np.ones(len(state.train_scores), dtype=bool)]
        )
    return scores, is_known


def sided_fraction(
    r: float, scores: np.ndarray, is_known: np.ndarray, normalizer: float
) -> float:
    """Fraction of samples on their correct side of the cutoff r * normalizer.

    Known surrogates count when score >= cutoff, open surrogates when
    score < cutoff (same orientation as the classifier verdict).
    """
    cutoff = r * normalizer
    above = scores >= cutoff
    correct = np.sum(above & is_known) + np.sum(~above & ~is_known)
    return float(correct) / len(scores)


def objective(r: float, calib: CalibrationSet, state: KnowledgeState) -> float:
    """Calibration accuracy at threshold ratio r, in [0, 1]."""
    scores, is_known = calibration_scores(calib, state)
    return sided_fraction(r, scores, is_known, training_score_mean(state))


def ternary_search(f: Callable[[float], float], config: SearchConfig) -> float:
    """Maximize f on [lo, hi] to interval width epsilon.

    An optional bracketing pre-pass (see SearchConfig) narrows the interval
    around the best coarse sample first. The shrinking loop then drops the
    worse third each iteration (ties drop both), so the interval contracts
    by at least 2/3 per step and the loop runs at most
    ceil(log_{3/2}((hi-lo)/epsilon)) + 1 times before hitting the cap. The
    returned point is the final midpoint unless some evaluated point scored
    strictly better.
    """
    if config.lo is None or config.hi is None:
        raise ValueError("ternary_search needs a fully specified interval")
    lo, hi = float(config.lo), float(config.hi)
    best_r, best_v = lo, f(lo)
    v_hi = f(hi)
    if v_hi > best_v:
        best_r, best_v = hi, v_hi
    if config.bracket_points > 2 and hi - lo > config.epsilon:
        step = (hi - lo) / (config.bracket_points - 1)
        for i in range(1, config.bracket_points - 1):
            r = lo + i * step
            v = f(r)
            if v > best_v:
                best_r, best_v = r, v
        lo = max(lo, best_r - step)
        hi = min(hi, best_r + step)
    iters = 0
    while hi - lo > config.epsilon and iters < config.max_iters:
        third = (hi - lo) / 3.0
        m1, m2 = lo + third, hi - third
        v1, v2 = f(m1), f(m2)
        if v1 > best_v:
            best_r, best_v = m1, v1
        if v2 > best_v:
            best_r, best_v = m2, v2
        if v1 < v2:
            lo = m1
        elif v1 > v2:
            hi = m2
        else:
            lo, hi = m1, m2
        iters += 1
    mid = (lo + hi) / 2.0
    if f(mid) >= best_v:
        return mid
    return best_r


def max_search_iters(lo: float, hi: float, epsilon: float) -> int:
    """The iteration bound the search honors: ceil(log_{3/2}(range/eps)) + 1."""
    if hi - lo <= epsilon:
        return 1
    return int(np.ceil(np.log((hi - lo) / epsilon) / np.log(1.5))) + 1


def calibrate(
    state: KnowledgeState, calib: CalibrationSet, config: SearchConfig | None = None
) -> KnowledgeState:
    """Set threshold_ratio to the search argmax of the calibration accuracy.

    The search interval spans the extreme normalized calibration scores.
    Raises CalibrationError (leaving the state untouched) when the normalizer
    is zero. Never mutates the Gram matrix, aggregates, or deviation.
    """
    if config is None:
        config = SearchConfig()
    weights = decode_weights(state)
    normalizer = training_score_mean(state, weights)
    if normalizer == 0.0:
        raise CalibrationError("train score mean is zero; cannot normalize cutoff")
    scores, is_known = calibration_scores(calib, state, weights)
    lo = config.lo if config.lo is not None else float(scores.min()) / normalizer
    hi = config.hi if config.hi is not None else float(scores.max()) / normalizer
    if lo > hi:
        lo, hi = hi, lo
    if hi - lo < config.epsilon:
        r = (lo + hi) / 2.0
    else:
        search = SearchConfig(lo=lo, hi=hi, epsilon=config.epsilon, max_iters=config.max_iters)
        r = ternary_search(
            lambda rr: sided_fraction(rr, scores, is_known, normalizer), search
        )
    state.train_score_mean = normalizer
    state.threshold_ratio = float(r)
    state.calibrated = True
    return state
