import numpy as np
import pytest

from owcl.errors import CalibrationError
from owcl.projection import IDENTITY, init_projection
from owcl.pseudo import (
    KNOWN_SURROGATE,
    OPEN_SURROGATE,
    CalibrationSet,
    PseudoConfig,
    PseudoSample,
    build_calibration_set,
)
from owcl.state import init_state, update_gram_and_aggregates
from owcl.threshold import (
    SearchConfig,
    calibrate,
    max_search_iters,
    objective,
    sided_fraction,
    ternary_search,
    training_score_mean,
)


def counting_objective(known, opens, normalizer):
    scores = np.array(list(known) + list(opens))
    is_known = np.array([True] * len(known) + [False] * len(opens))
    return lambda r: sided_fraction(r, scores, is_known, normalizer)


def test_counting_oracle_four_samples():
    # known = {1.2, 0.9}, open = {0.5, 0.3}, mean = 1.0
    f = counting_objective([1.2, 0.9], [0.5, 0.3], 1.0)
    assert f(0.7) == 1.0
    assert f(1.0) == 0.75


def test_extreme_r_sides_everything_known():
    f = counting_objective([1.2, 0.9], [0.5, 0.3], 1.0)
    assert f(0.1) == 0.5  # all classified known: only the knowns count


def test_perfect_separation_reaches_one():
    f = counting_objective([2.0, 3.0], [0.1, 0.2], 1.0)
    best = ternary_search(f, SearchConfig(lo=0.1, hi=3.0, epsilon=1e-4))
    assert f(best) == 1.0


def test_parabola_argmax():
    f = lambda r: -((r - 2.0) ** 2)
    best = ternary_search(f, SearchConfig(lo=0.0, hi=10.0, epsilon=1e-6))
    assert best == pytest.approx(2.0, abs=1e-5)


def test_decreasing_function_boundary():
    f = lambda r: -r
    best = ternary_search(f, SearchConfig(lo=0.0, hi=10.0, epsilon=1e-3))
    assert best <= 1e-3


def test_piecewise_constant_vs_grid_oracle():
    f = counting_objective([1.2, 0.9], [0.5, 0.3], 1.0)
    best = ternary_search(f, SearchConfig(lo=0.3, hi=1.2, epsilon=1e-4))
    grid = np.linspace(0.3, 1.2, 100000)
    grid_best = max(f(r) for r in grid)
    assert f(best) >= grid_best - 1e-9


def test_iteration_bound():
    calls = 0

    def f(r):
        nonlocal calls
        calls += 1
        return -((r - 1.0) ** 2)

    lo, hi, eps = 0.0, 10.0, 1e-3
    config = SearchConfig(lo=lo, hi=hi, epsilon=eps, max_iters=10**6)
    ternary_search(f, config)
    # evaluations: bracket pass (endpoints included) + 2 per iteration + 1
    # final midpoint
    iters = (calls - config.bracket_points - 1) // 2
    assert iters <= max_search_iters(lo, hi, eps)


def test_returned_point_beats_final_endpoints():
    rng = np.random.default_rng(0)
    for trial in range(20):
        known = rng.normal(1.0, 0.3, size=30)
        opens = rng.normal(0.4, 0.3, size=30)
        f = counting_objective(known, opens, 1.0)
        lo = float(min(known.min(), opens.min()))
        hi = float(max(known.max(), opens.max()))
        best = ternary_search(f, SearchConfig(lo=lo, hi=hi, epsilon=1e-4))
        assert f(best) >= f(lo) and f(best) >= f(hi)


def _calibratable_state(num_classes=3, m=3, spread=1.0):
    state = init_state(init_projection(m, m, seed=0, nonlinearity=IDENTITY), 1.0)
    rng = np.random.default_rng(2)
    for k in range(num_classes):
        center = np.zeros(m)
        center[k % m] = 8.0 * (k + 1)
        h = center + spread * rng.standard_normal((25, m))
        update_gram_and_aggregates(state, h, [k] * 25)
    return state


def test_objective_matches_manual_count():
    state = _calibratable_state()
    calib = build_calibration_set(state, PseudoConfig(seed=3))
    from owcl.state import decode_weights
    from owcl.threshold import calibration_scores

    w = decode_weights(state)
    scores, is_known = calibration_scores(calib, state, w)
    norm = training_score_mean(state, w)
    r = 0.8
    manual = np.mean(
        np.where(scores >= r * norm, is_known, ~is_known).astype(float)
    )
    assert objective(r, calib, state) == pytest.approx(float(manual), rel=1e-12)


def test_objective_empty_calibration_set():
    state = _calibratable_state()
    with pytest.raises(CalibrationError):
        objective(1.0, CalibrationSet([], 0), state)


def test_calibrate_perfect_separation_objective_one():
    state = _calibratable_state()
    calib = build_calibration_set(
        state, PseudoConfig(n_positive_per_class=30, n_negative_per_pair=10, seed=4)
    )
    calibrate(state, calib, SearchConfig(epsilon=1e-4))
    assert state.calibrated
    assert objective(state.threshold_ratio, calib, state) == 1.0


def test_calibrate_flat_objective_identical_scores():
    # all calibration samples identical: objective is flat, any r valid
    state = _calibratable_state(2, m=2)
    vec = np.array([1.0, 1.0])
    samples = [
        PseudoSample(vec, KNOWN_SURROGATE, source_class=0),
        PseudoSample(vec, OPEN_SURROGATE, source_pair=(0, 1), zeta=1.0),
    ]
    calib = CalibrationSet(samples, 0)
    calibrate(state, calib, SearchConfig(epsilon=1e-4))
    flat_value = objective(state.threshold_ratio, calib, state)
    assert flat_value == 0.5


def test_calibrate_vs_grid_oracle_synthetic_state():
    state = _calibratable_state(3)
    calib = build_calibration_set(state, PseudoConfig(seed=5))
    calibrate(state, calib, SearchConfig(epsilon=1e-4))
    from owcl.state import decode_weights
    from owcl.threshold import calibration_scores

    w = decode_weights(state)
    scores, is_known = calibration_scores(calib, state, w)
    norm = training_score_mean(state, w)
    lo, hi = scores.min() / norm, scores.max() / norm
    grid_best = max(
        sided_fraction(r, scores, is_known, norm) for r in np.linspace(lo, hi, 1000)
    )
    achieved = objective(state.threshold_ratio, calib, state)
    assert achieved >= grid_best - 0.01


def test_calibrate_zero_mean_raises_and_preserves():
    state = _calibratable_state(2, m=2)
    state.gram = state.gram * 0.0
    state.class_aggregate = state.class_aggregate * 0.0  # all prototypes zero
    calib = build_calibration_set(state, PseudoConfig(seed=6))
    before = state.threshold_ratio
    with pytest.raises(CalibrationError):
        calibrate(state, calib, SearchConfig())
    assert state.threshold_ratio == before
    assert not state.calibrated


def test_calibrate_never_mutates_statistics():
    state = _calibratable_state(3)
    gram = state.gram.copy()
    agg = state.class_aggregate.copy()
    delta = state.delta_sq
    calib = build_calibration_set(state, PseudoConfig(seed=7))
    calibrate(state, calib, SearchConfig())
    assert np.array_equal(state.gram, gram)
    assert np.array_equal(state.class_aggregate, agg)
    assert state.delta_sq == delta


def test_training_score_mean_matches_per_sample_average():
    # the state-derived normalizer equals the explicit mean of each training
    # sample's own-class decision score
    state = init_state(init_projection(3, 3, seed=1, nonlinearity=IDENTITY), 1.0)
    rng = np.random.default_rng(8)
    h_all, labels_all = [], []
    for k in range(3):
        h = 5.0 * (k + 1) + rng.standard_normal((12, 3))
        update_gram_and_aggregates(state, h, [k] * 12)
        h_all.append(h)
        labels_all += [k] * 12
    from owcl.state import decision_weights, decode_weights

    w = decode_weights(state)
    dw = decision_weights(state, w)
    h_cat = np.vstack(h_all)
    per_sample = [
        float(h_cat[i] @ dw[:, state.column_of(lbl)]) for i, lbl in enumerate(labels_all)
    ]
    assert training_score_mean(state, w) == pytest.approx(np.mean(per_sample), rel=1e-12)


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(lo=1.0, hi=0.0)
    with pytest.raises(ValueError):
        SearchConfig(epsilon=0.0)
