"""End-to-end orchestration: simulate, train, calibrate, evaluate, report.

Per seed the flow is: build (or load) the task stream, freeze one random
projection, then for each task in order project the train batch, fold it
into the Gram/aggregate/deviation statistics, rebuild the pseudo-sample
calibration set, re-run the threshold search, and only then evaluate that
task's test split. Reports carry per-task rows plus averages, and are
written with sorted keys and no timestamps so identical configs produce
byte-identical files.

The ablation mode drops the whole calibrated-prototype machinery and falls
back to a max-logit baseline: class means over the raw (unprojected)
embeddings, dot-product logits, and a fixed percentile of training
best-scores as the cutoff.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .dataio import OPEN_LABEL, TaskDataset, read_dataset, split_matrix
from .errors import ConfigError, NotEnoughClassesError
from .metrics import Aggregate, EvalRecord, MetricsReport, aggregate, build_report
from .projection import NONLINEARITIES, RELU, init_projection, project
from .pseudo import PseudoConfig, build_calibration_set
from .scenarios import ScenarioConfig, generate, read_manifest
from .scoring import record_training_scores, score_batch
from .state import (
    KnowledgeState,
    decision_weights,
    decode_weights,
    init_state,
    load_state,
    pick_ridge_lambda,
    save_state,
    scaled_ridge_lambda,
    update_delta,
    update_gram_and_aggregates,
)
from .threshold import SearchConfig, calibrate

_SEED_MASK = (1 << 63) - 1

FULL = "full"
ABLATION_NO_DAP = "ablation_no_dap"
MODES = (FULL, ABLATION_NO_DAP)

CUTOFF_CALIBRATED = "calibrated"
CUTOFF_PERCENTILE = "percentile"

OUTPUT_DIR_ENV = "OWCL_OUTPUT_DIR"


def derive_seed(*parts: int) -> int:
    """Deterministic child seed from a tuple of integers."""
    seq = np.random.SeedSequence(tuple(p & _SEED_MASK for p in parts))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class NrpSettings:
    m: int = 2500
    seed: int = 0
    sigma_w: float = 1.0
    nonlinearity: str = RELU


@dataclass
class RunConfig:
    """Everything one experiment needs; exactly one data source must be set."""

    scenario: ScenarioConfig | None = None
    dataset_dir: str | None = None
    nrp: NrpSettings = field(default_factory=NrpSettings)
    ridge_mode: str = "scaled"  # scaled | fixed | auto
    ridge_lambda: float = 1.0  # value for fixed mode (and the initial value)
    ridge_scale: float = 0.1  # trace multiplier for scaled mode
    dap: PseudoConfig = field(default_factory=PseudoConfig)
    search_epsilon: float = 1e-3
    search_max_iters: int = 100
    seeds: list[int] = field(default_factory=lambda: [0])
    output_dir: str = ""
    mode: str = FULL
    ablation_percentile: float = 0.05

    def validate(self) -> None:
        if (self.scenario is None) == (self.dataset_dir is None):
            raise ConfigError("exactly one of scenario / dataset_dir must be set")
        if self.scenario is not None:
            self.scenario.validate()
        if self.dataset_dir is not None and not os.path.isdir(self.dataset_dir):
            raise ConfigError(f"dataset_dir does not exist: {self.dataset_dir}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.ridge_mode not in ("scaled", "fixed", "auto"):
            raise ConfigError(f"unknown ridge_mode {self.ridge_mode!r}")
        if self.nrp.nonlinearity not in NONLINEARITIES:
            raise ConfigError(f"unknown nonlinearity {self.nrp.nonlinearity!r}")
        if self.nrp.m < 1:
            raise ConfigError("nrp m must be >= 1")
        if not self.output_dir:
            raise ConfigError("output_dir must be set (flag or OWCL_OUTPUT_DIR)")


def train_task(
    state: KnowledgeState,
    dataset: TaskDataset,
    *,
    dap: PseudoConfig,
    search_epsilon: float,
    search_max_iters: int,
    ridge_mode: str,
    calib_seed: int,
    ridge_scale: float = 0.1,
) -> None:
    """One training step: absorb the task, then recalibrate the threshold.

    With fewer than two classes seen, calibration is deferred and the
    previous threshold stands.
    """
    x, labels = split_matrix(dataset.train)
    if x.size == 0:
        return
    h = project(x, state.projection)
    update_gram_and_aggregates(state, h, labels)
    update_delta(state, h, labels)
    if ridge_mode == "scaled":
        state.ridge_lambda = scaled_ridge_lambda(state, ridge_scale)
    elif ridge_mode == "auto":
        state.ridge_lambda = pick_ridge_lambda(state, h, labels)
    weights = decode_weights(state)
    record_training_scores(state, h, weights)
    try:
        calib = build_calibration_set(
            state, dataclasses.replace(dap, seed=calib_seed)
        )
    except NotEnoughClassesError:
        return
    calibrate(
        state,
        calib,
        SearchConfig(epsilon=search_epsilon, max_iters=search_max_iters),
    )


def evaluate_task(
    state: KnowledgeState,
    dataset: TaskDataset,
    cutoff_rule: str = CUTOFF_CALIBRATED,
    percentile: float = 0.05,
) -> list[EvalRecord]:
    """Score a task's test split and produce one EvalRecord per sample.

    Matches classify()/classify_ablated() sample-for-sample but decodes the
    weights once for the whole split.
    """
    x, labels = split_matrix(dataset.test)
    if x.size == 0:
        return []
    h = project(x, state.projection)
    s = score_batch(h, decision_weights(state))
    # Columns sorted by class id so argmax's first-hit rule breaks ties low.
    order = np.argsort(state.class_ids)
    ids_sorted = np.asarray(state.class_ids)[order]
    s_sorted = s[:, order]
    best_idx = np.argmax(s_sorted, axis=1)
    best = s_sorted[np.arange(len(labels)), best_idx]
    if cutoff_rule == CUTOFF_CALIBRATED:
        if not state.calibrated:
            raise ConfigError("state was never calibrated; cannot evaluate")
        cutoff = state.threshold_ratio * state.train_score_mean
    elif cutoff_rule == CUTOFF_PERCENTILE:
        if len(state.train_scores) == 0:
            raise ConfigError("no recorded training scores for percentile cutoff")
        cutoff = float(np.quantile(state.train_scores, percentile))
    else:
        raise ConfigError(f"unknown cutoff rule {cutoff_rule!r}")
    records = []
    for i, lbl in enumerate(labels):
        known = best[i] >= cutoff
        records.append(
            EvalRecord(
                true_label=lbl,
                predicted=int(ids_sorted[best_idx[i]]) if known else None,
                best_score=float(best[i]),
            )
        )
    return records


class RawMeanBaseline:
    """Max-logit baseline without calibrated prototypes.

    Keeps per-class mean vectors in the raw embedding space, scores by dot
    product, and thresholds at a fixed percentile of training best-scores.
    """

    def __init__(self, dimension: int, percentile: float = 0.05):
        self.dimension = dimension
        self.percentile = percentile
        self.class_ids: list[int] = []
        self.sums = np.zeros((dimension, 0))
        self.counts = np.zeros(0, dtype=np.int64)
        self.train_best: list[float] = []

    def _means(self) -> np.ndarray:
        return self.sums / self.counts[np.newaxis, :]

    def absorb(self, x: np.ndarray, labels: list[int | None]) -> None:
        for lbl in labels:
            if lbl not in self.class_ids:
                self.class_ids.append(int(lbl))
                self.sums = np.hstack([self.sums, np.zeros((self.dimension, 1))])
                self.counts = np.append(self.counts, 0)
        arr = np.asarray(labels)
        for lbl in np.unique(arr):
            col = self.class_ids.index(int(lbl))
            mask = arr == lbl
            self.sums[:, col] += x[mask].sum(axis=0)
            self.counts[col] += int(mask.sum())
        self.train_best.extend((x @ self._means()).max(axis=1).tolist())

    def evaluate(self, dataset: TaskDataset) -> list[EvalRecord]:
        x, labels = split_matrix(dataset.test)
        if x.size == 0:
            return []
        s = x @ self._means()
        order = np.argsort(self.class_ids)
        ids_sorted = np.asarray(self.class_ids)[order]
        s_sorted = s[:, order]
        best_idx = np.argmax(s_sorted, axis=1)
        best = s_sorted[np.arange(len(labels)), best_idx]
        cutoff = float(np.quantile(self.train_best, self.percentile))
        return [
            EvalRecord(
                true_label=lbl,
                predicted=int(ids_sorted[best_idx[i]]) if best[i] >= cutoff else None,
                best_score=float(best[i]),
            )
            for i, lbl in enumerate(labels)
        ]


def _load_dataset_dir(dataset_dir: str) -> list[TaskDataset]:
    manifest = read_manifest(os.path.join(dataset_dir, "manifest.json"))
    return [read_dataset(p) for p in manifest.task_paths]


def run_seed(
    config: RunConfig, run_seed_value: int, tasks: list[TaskDataset] | None = None
) -> MetricsReport:
    """One full pass for a single seed; returns the metrics report."""
    if tasks is None:
        if config.scenario is not None:
            gen_cfg = dataclasses.replace(
                config.scenario, seed=derive_seed(config.scenario.seed, run_seed_value, 0)
            )
            tasks = generate(gen_cfg).tasks
        else:
            tasks = _load_dataset_dir(config.dataset_dir)
    if not tasks:
        raise ConfigError("no tasks to train on")
    dimension = tasks[0].dimension

    per_task_records: dict[int, list[EvalRecord]] = {}
    if config.mode == ABLATION_NO_DAP:
        baseline = RawMeanBaseline(dimension, config.ablation_percentile)
        for t, ds in enumerate(tasks):
            x, labels = split_matrix(ds.train)
            baseline.absorb(x, labels)
            per_task_records[t] = baseline.evaluate(ds)
        return build_report(per_task_records)

    params = init_projection(
        dimension,
        config.nrp.m,
        derive_seed(config.nrp.seed, run_seed_value, 1),
        config.nrp.sigma_w,
        config.nrp.nonlinearity,
    )
    state = init_state(params, config.ridge_lambda)
    for t, ds in enumerate(tasks):
        train_task(
            state,
            ds,
            dap=config.dap,
            search_epsilon=config.search_epsilon,
            search_max_iters=config.search_max_iters,
            ridge_mode=config.ridge_mode,
            calib_seed=derive_seed(config.dap.seed, run_seed_value, 2, t),
            ridge_scale=config.ridge_scale,
        )
        per_task_records[t] = evaluate_task(state, ds)
    return build_report(per_task_records)


def _report_doc(report: MetricsReport, seed: int) -> dict:
    return {
        "format": "owcl-report",
        "version": 1,
        "seed": seed,
        "overall": {
            "acc": report.acc,
            "auc": report.auc,
            "fpr": report.fpr,
            "pooled_acc": report.pooled_acc,
            "pooled_auc": report.pooled_auc,
            "pooled_fpr": report.pooled_fpr,
            "n_known": report.n_known,
            "n_open": report.n_open,
        },
        "per_task": [
            {
                "task": tm.task_id,
                "acc": tm.acc,
                "auc": tm.auc,
                "fpr": tm.fpr,
                "n_known": tm.n_known,
                "n_open": tm.n_open,
            }
            for tm in report.per_task
        ],
    }


def _write_json(doc: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def report_from_doc(doc: dict) -> MetricsReport:
    """Rebuild a MetricsReport from its JSON document (for aggregation)."""
    from .metrics import TaskMetrics

    overall = doc["overall"]
    return MetricsReport(
        acc=overall["acc"],
        auc=overall["auc"],
        fpr=overall["fpr"],
        pooled_acc=overall["pooled_acc"],
        pooled_auc=overall["pooled_auc"],
        pooled_fpr=overall["pooled_fpr"],
        per_task=[
            TaskMetrics(
                task_id=row["task"],
                acc=row["acc"],
                auc=row["auc"],
                fpr=row["fpr"],
                n_known=row["n_known"],
                n_open=row["n_open"],
            )
            for row in doc["per_task"]
        ],
        n_known=overall["n_known"],
        n_open=overall["n_open"],
    )


def _aggregate_rows(reports: list[MetricsReport]) -> list[tuple[str, str, float, float | None]]:
    rows: list[tuple[str, str, float, float | None]] = []
    task_ids = sorted({tm.task_id for r in reports for tm in r.per_task})
    for t in task_ids:
        for name in ("acc", "auc", "fpr"):
            values = [
                getattr(tm, name)
                for r in reports
                for tm in r.per_task
                if tm.task_id == t and getattr(tm, name) is not None
            ]
            if not values:
                continue
            mean = sum(values) / len(values)
            std = float(np.std(values, ddof=1)) if len(values) > 1 else None
            rows.append((name, str(t), mean, std))
    for name, agg in aggregate(reports).items():
        rows.append((name, "all", agg.mean, agg.std))
    return rows


@dataclass
class RunResult:
    reports: list[MetricsReport]
    aggregates: dict[str, Aggregate]
    report_paths: list[str]
    aggregate_json_path: str
    aggregate_csv_path: str


def write_reports(
    reports: list[MetricsReport], seeds: list[int], output_dir: str
) -> RunResult:
    """Write per-seed JSON reports plus the aggregate JSON and CSV."""
    os.makedirs(output_dir, exist_ok=True)
    paths = []
    for seed, report in zip(seeds, reports):
        path = os.path.join(output_dir, f"report_seed_{seed}.json")
        _write_json(_report_doc(report, seed), path)
        paths.append(path)
    aggs = aggregate(reports)
    agg_doc = {
        "format": "owcl-aggregate",
        "version": 1,
        "seeds": list(seeds),
        "metrics": {
            name: {"mean": agg.mean, "std": agg.std} for name, agg in aggs.items()
        },
        "per_task": [
            {"metric": name, "task": task, "mean": mean, "std": std}
            for name, task, mean, std in _aggregate_rows(reports)
        ],
    }
    json_path = os.path.join(output_dir, "report.json")
    _write_json(agg_doc, json_path)
    csv_path = os.path.join(output_dir, "report.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("metric,task,mean,std\n")
        for name, task, mean, std in _aggregate_rows(reports):
            fh.write(f"{name},{task},{mean!r},{'' if std is None else repr(std)}\n")
    return RunResult(reports, aggs, paths, json_path, csv_path)


def run_experiment(config: RunConfig) -> RunResult:
    """Run every seed and write all report files into the output directory."""
    config.validate()
    tasks = None
    if config.dataset_dir is not None:
        tasks = _load_dataset_dir(config.dataset_dir)
    reports = [run_seed(config, s, tasks) for s in config.seeds]
    return write_reports(reports, config.seeds, config.output_dir)


# ---------------------------------------------------------------------------
# Staged subcommand helpers (train / eval as separate steps).


def checkpoint_path(out_dir: str, task_index: int) -> str:
    return os.path.join(out_dir, f"state_after_{task_index:03d}.bin")


def train_on_files(
    task_paths: list[str],
    *,
    nrp: NrpSettings,
    ridge_mode: str = "scaled",
    ridge_lambda: float = 1.0,
    ridge_scale: float = 0.1,
    dap: PseudoConfig | None = None,
    search_epsilon: float = 1e-3,
    search_max_iters: int = 100,
    run_seed_value: int = 0,
    out_dir: str,
    resume_state: str | None = None,
    start_task: int = 0,
) -> list[str]:
    """Train task files in order, writing a state checkpoint after each task.

    Resuming from a saved checkpoint with the matching start_task reproduces
    the uninterrupted run exactly. Returns the checkpoint paths written.
    """
    if not task_paths:
        raise ConfigError("no tasks")
    if dap is None:
        dap = PseudoConfig()
    os.makedirs(out_dir, exist_ok=True)
    if resume_state is not None:
        state = load_state(resume_state)
    else:
        if start_task != 0:
            raise ConfigError("start_task requires resume_state")
        ds0 = read_dataset(task_paths[0])
        params = init_projection(
            ds0.dimension,
            nrp.m,
            derive_seed(nrp.seed, run_seed_value, 1),
            nrp.sigma_w,
            nrp.nonlinearity,
        )
        state = init_state(params, ridge_lambda)
    written = []
    for offset, path in enumerate(task_paths):
        t = start_task + offset
        ds = read_dataset(path)
        train_task(
            state,
            ds,
            dap=dap,
            search_epsilon=search_epsilon,
            search_max_iters=search_max_iters,
            ridge_mode=ridge_mode,
            calib_seed=derive_seed(dap.seed, run_seed_value, 2, t),
            ridge_scale=ridge_scale,
        )
        cp = checkpoint_path(out_dir, t)
        save_state(state, cp)
        written.append(cp)
    final = os.path.join(out_dir, "state.bin")
    save_state(state, final)
    written.append(final)
    return written


def _record_line(rec: EvalRecord) -> str:
    true = OPEN_LABEL if rec.true_label is None else str(rec.true_label)
    pred = OPEN_LABEL if rec.predicted is None else str(rec.predicted)
    return f"{true},{pred},{rec.best_score!r}"


def write_records(records: list[EvalRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("true_label,predicted,best_score\n")
        for rec in records:
            fh.write(_record_line(rec) + "\n")


def eval_checkpoints(
    task_paths: list[str],
    *,
    checkpoint_dir: str | None = None,
    state_path: str | None = None,
    cutoff_rule: str = CUTOFF_CALIBRATED,
    percentile: float = 0.05,
    seed_label: int = 0,
    out_dir: str,
) -> tuple[MetricsReport, str]:
    """Evaluate task test splits and write per-task records plus a report.

    With checkpoint_dir, task t is scored under the state saved after task t
    (matching the one-shot pipeline); with state_path, every task is scored
    under that single state.
    """
    if (checkpoint_dir is None) == (state_path is None):
        raise ConfigError("exactly one of checkpoint_dir / state_path must be set")
    if not task_paths:
        raise ConfigError("no tasks")
    os.makedirs(out_dir, exist_ok=True)
    single = load_state(state_path) if state_path is not None else None
    per_task: dict[int, list[EvalRecord]] = {}
    for t, path in enumerate(task_paths):
        ds = read_dataset(path)
        state = single if single is not None else load_state(
            checkpoint_path(checkpoint_dir, t)
        )
        records = evaluate_task(state, ds, cutoff_rule, percentile)
        per_task[t] = records
        write_records(records, os.path.join(out_dir, f"records_{t:03d}.csv"))
    report = build_report(per_task)
    report_path = os.path.join(out_dir, f"report_seed_{seed_label}.json")
    _write_json(_report_doc(report, seed_label), report_path)
    return report, report_path
