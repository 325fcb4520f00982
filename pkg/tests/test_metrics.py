import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from owcl.metrics import (
    EvalRecord,
    accuracy,
    aggregate,
    auc,
    build_report,
    fpr,
    task_metrics,
)


def rec(true, pred, score=0.0):
    return EvalRecord(true_label=true, predicted=pred, best_score=score)


def test_accuracy_all_correct():
    records = [rec(0, 0), rec(1, 1), rec(2, 2)]
    assert accuracy(records) == 1.0


def test_known_flagged_open_counts_wrong():
    records = [rec(0, None), rec(0, 0)]
    assert accuracy(records) == 0.5


def test_accuracy_two_of_three():
    records = [rec(0, 0), rec(1, 1), rec(2, 0)]
    assert accuracy(records) == pytest.approx(2 / 3)


def test_accuracy_ignores_open_records():
    records = [rec(0, 0), rec(None, 5, 9.0)]
    assert accuracy(records) == 1.0


def test_accuracy_requires_known():
    with pytest.raises(ValueError):
        accuracy([rec(None, None)])


def test_auc_perfect_separation():
    records = [rec(0, 0, 2.0), rec(1, 1, 3.0), rec(None, None, 0.1)]
    assert auc(records) == 1.0


def test_auc_identical_scores_half():
    records = [rec(0, 0, 1.0), rec(0, 0, 2.0), rec(None, None, 1.0), rec(None, None, 2.0)]
    assert auc(records) == 0.5


def test_auc_pair_counting_oracle():
    # known = {0.9, 0.4}, open = {0.5, 0.1} -> 3 of 4 pairs ordered correctly
    records = [rec(0, 0, 0.9), rec(1, 1, 0.4), rec(None, None, 0.5), rec(None, None, 0.1)]
    assert auc(records) == pytest.approx(0.75)


def test_auc_needs_both_sides():
    with pytest.raises(ValueError):
        auc([rec(0, 0, 1.0)])


def test_fpr_extremes_and_fraction():
    opens_caught = [rec(None, None), rec(None, None)]
    assert fpr(opens_caught) == 0.0
    opens_missed = [rec(None, 3), rec(None, 1)]
    assert fpr(opens_missed) == 1.0
    mixed = [rec(None, 1), rec(None, None), rec(None, None), rec(None, None)]
    assert fpr(mixed) == 0.25


def test_fpr_requires_open():
    with pytest.raises(ValueError):
        fpr([rec(0, 0)])


def test_auc_invariant_under_monotone_transform():
    rng = np.random.default_rng(0)
    records = [
        rec(0 if rng.random() < 0.5 else None, 0, float(rng.standard_normal()))
        for _ in range(50)
    ]
    records.append(rec(0, 0, 1.0))
    records.append(rec(None, None, -1.0))
    base = auc(records)
    transformed = [
        EvalRecord(r.true_label, r.predicted, float(np.exp(2.0 * r.best_score)))
        for r in records
    ]
    assert auc(transformed) == pytest.approx(base, rel=1e-12)


def test_auc_complement_under_negation():
    rng = np.random.default_rng(1)
    # tie-free scores
    scores = rng.permutation(np.arange(40)).astype(float)
    records = [
        rec(0 if i % 2 == 0 else None, 0, float(s)) for i, s in enumerate(scores)
    ]
    a = auc(records)
    negated = [EvalRecord(r.true_label, r.predicted, -r.best_score) for r in records]
    assert auc(negated) == pytest.approx(1.0 - a, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.permutations(list(range(8))))
def test_accuracy_and_fpr_order_invariant(order):
    base = [rec(0, 0, 1.0), rec(1, 0, 1.0), rec(None, None, 0.0), rec(None, 2, 0.5),
            rec(2, 2, 2.0), rec(3, None, 0.1), rec(None, None, 0.2), rec(0, 0, 0.9)]
    shuffled = [base[i] for i in order]
    assert accuracy(shuffled) == accuracy(base)
    assert fpr(shuffled) == fpr(base)


def test_aggregate_mean_and_sample_std():
    reports = [
        build_report({0: [rec(0, 0, 1.0), rec(None, None, 0.0)]}),
        build_report({0: [rec(0, 0, 1.0), rec(0, None, 1.0), rec(None, None, 0.0)]}),
    ]
    # accs: 1.0 and 0.5 -> mean 0.75, sample std of {1.0, 0.5}
    agg = aggregate(reports)
    assert agg["acc"].mean == pytest.approx(0.75)
    assert agg["acc"].std == pytest.approx(float(np.std([1.0, 0.5], ddof=1)))


def test_aggregate_identical_reports_std_zero():
    r1 = build_report({0: [rec(0, 0, 1.0), rec(None, None, 0.0)]})
    r2 = build_report({0: [rec(0, 0, 1.0), rec(None, None, 0.0)]})
    agg = aggregate([r1, r2])
    assert agg["acc"].std == pytest.approx(0.0)


def test_aggregate_single_report_std_absent():
    r = build_report({0: [rec(0, 0, 1.0), rec(None, None, 0.0)]})
    agg = aggregate([r])
    assert agg["acc"].mean == 1.0
    assert agg["acc"].std is None


def test_aggregate_mean_std_arithmetic():
    # values {0.8, 0.9} -> mean 0.85, std ~= 0.0707
    vals = [0.8, 0.9]
    std = float(np.std(vals, ddof=1))
    assert std == pytest.approx(0.070710678, rel=1e-6)


def test_aggregate_empty():
    with pytest.raises(ValueError):
        aggregate([])


def test_build_report_structure():
    per_task = {
        0: [rec(0, 0, 1.0), rec(None, None, 0.0)],
        1: [rec(0, 0, 1.0), rec(1, 1, 2.0), rec(None, 1, 1.5)],
    }
    report = build_report(per_task)
    assert len(report.per_task) == 2
    assert report.n_known == 3 and report.n_open == 2
    assert 0.0 <= report.acc <= 1.0
    assert 0.0 <= report.auc <= 1.0
    assert 0.0 <= report.fpr <= 1.0
    assert report.per_task[0].task_id == 0
    # headline is the average of per-task values
    assert report.fpr == pytest.approx((0.0 + 1.0) / 2)


def test_task_metrics_missing_sides():
    tm = task_metrics(0, [rec(0, 0, 1.0)])
    assert tm.auc is None and tm.fpr is None and tm.acc == 1.0
