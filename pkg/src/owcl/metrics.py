"""Evaluation metrics: known-class accuracy, known-vs-open AUC, and FPR.

Accuracy covers only records with a known true label (open records have no
correct class); open-detection quality is carried by AUC and FPR. AUC is the
Mann-Whitney rank statistic over best scores (ties count one half), so it is
invariant under any strictly increasing transform of the scores. FPR is the
fraction of open records the verdict lets through as known.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class EvalRecord:
    """One test sample's outcome: truth, verdict, and the best score.

    ``true_label is None`` marks an open-labeled record; ``predicted is
    None`` marks an open verdict, otherwise it is the argmax class.
    """

    true_label: int | None
    predicted: int | None
    best_score: float


@dataclass(frozen=True)
class TaskMetrics:
    task_id: int
    acc: float | None
    auc: float | None
    fpr: float | None
    n_known: int
    n_open: int


@dataclass
class MetricsReport:
    """Headline metrics are per-task averages; pooled values run over all
    records of all tasks together."""

    acc: float | None
    auc: float | None
    fpr: float | None
    pooled_acc: float | None
    pooled_auc: float | None
    pooled_fpr: float | None
    per_task: list[TaskMetrics] = field(default_factory=list)
    n_known: int = 0
    n_open: int = 0


def accuracy(records: list[EvalRecord]) -> float:
    """Fraction of known-labeled records whose verdict names the true class."""
    known = [r for r in records if r.true_label is not None]
    if not known:
        raise ValueError("accuracy needs at least one known-labeled record")
    correct = sum(1 for r in known if r.predicted == r.true_label)
    return correct / len(known)


def auc(records: list[EvalRecord]) -> float:
    """Mann-Whitney AUC of best scores: known above open, ties at one half."""
    known = np.array([r.best_score for r in records if r.true_label is not None])
    open_ = np.array([r.best_score for r in records if r.true_label is None])
    if len(known) == 0 or len(open_) == 0:
        raise ValueError("auc needs both known- and open-labeled records")
    ranks = rankdata(np.concatenate([known, open_]))
    u = ranks[: len(known)].sum() - len(known) * (len(known) + 1) / 2.0
    return float(u) / (len(known) * len(open_))


def fpr(records: list[EvalRecord]) -> float:
    """Fraction of open-labeled records mistakenly classified as known."""
    open_ = [r for r in records if r.true_label is None]
    if not open_:
        raise ValueError("fpr needs at least one open-labeled record")
    return sum(1 for r in open_ if r.predicted is not None) / len(open_)


def task_metrics(task_id: int, records: list[EvalRecord]) -> TaskMetrics:
    """Per-task metrics; a metric is None when its side of the data is absent."""
    n_known = sum(1 for r in records if r.true_label is not None)
    n_open = len(records) - n_known
    return TaskMetrics(
        task_id=task_id,
        acc=accuracy(records) if n_known else None,
        auc=auc(records) if n_known and n_open else None,
        fpr=fpr(records) if n_open else None,
        n_known=n_known,
        n_open=n_open,
    )


def _mean_defined(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return sum(present) / len(present) if present else None


def build_report(per_task_records: dict[int, list[EvalRecord]]) -> MetricsReport:
    """Assemble per-task rows, their averages, and pooled-over-all-records values."""
    per_task = [task_metrics(t, recs) for t, recs in sorted(per_task_records.items())]
    pooled = [r for recs in per_task_records.values() for r in recs]
    n_known = sum(tm.n_known for tm in per_task)
    n_open = sum(tm.n_open for tm in per_task)
    return MetricsReport(
        acc=_mean_defined([tm.acc for tm in per_task]),
        auc=_mean_defined([tm.auc for tm in per_task]),
        fpr=_mean_defined([tm.fpr for tm in per_task]),
        pooled_acc=accuracy(pooled) if n_known else None,
        pooled_auc=auc(pooled) if n_known and n_open else None,
        pooled_fpr=fpr(pooled) if n_open else None,
        per_task=per_task,
        n_known=n_known,
        n_open=n_open,
    )


@dataclass(frozen=True)
class Aggregate:
    mean: float
    std: float | None  # sample std (n-1); absent for a single report


def aggregate(reports: list[MetricsReport]) -> dict[str, Aggregate]:
    """Mean and sample standard deviation of each headline metric across seeds."""
    if not reports:
        raise ValueError("aggregate needs at least one report")
    out: dict[str, Aggregate] = {}
    for name in ("acc", "auc", "fpr"):
        values = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        if not values:
            continue
        mean = sum(values) / len(values)
        std = float(np.std(values, ddof=1)) if len(values) > 1 else None
        out[name] = Aggregate(mean, std)
    return out
