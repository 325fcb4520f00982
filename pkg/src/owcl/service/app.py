"""FastAPI service wrapping the engine.

The service is a local, file-based front end: requests reference dataset,
state, and output paths on the shared filesystem, run synchronously, and
return summaries. Engine validation errors map to 400, anything else to 500.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, HTTPException

from ..errors import OwclError
from ..metrics import MetricsReport
from ..pipeline import (
    NrpSettings,
    RunConfig,
    eval_checkpoints,
    run_experiment,
    train_on_files,
    write_reports,
)
from ..pseudo import PseudoConfig
from ..scenarios import ScenarioConfig, export, generate, read_manifest
from ..state import load_state
from . import schemas

app = FastAPI(title="owcl", description="Open-world continual-learning engine")


def _scenario_config(model: schemas.ScenarioModel) -> ScenarioConfig:
    return ScenarioConfig(**model.model_dump())


def _nrp(model: schemas.NrpModel) -> NrpSettings:
    return NrpSettings(**model.model_dump())


def _dap(model: schemas.DapModel) -> PseudoConfig:
    return PseudoConfig(
        n_positive_per_class=model.n_positive_per_class,
        n_negative_per_pair=model.n_negative_per_pair,
        zeta_range=(model.zeta_lo, model.zeta_hi),
        pair_cap=model.pair_cap,
        seed=model.seed,
    )


def _report_model(report: MetricsReport) -> schemas.ReportModel:
    return schemas.ReportModel(
        acc=report.acc,
        auc=report.auc,
        fpr=report.fpr,
        pooled_acc=report.pooled_acc,
        pooled_auc=report.pooled_auc,
        pooled_fpr=report.pooled_fpr,
        per_task=[
            schemas.TaskMetricsModel(
                task=tm.task_id,
                acc=tm.acc,
                auc=tm.auc,
                fpr=tm.fpr,
                n_known=tm.n_known,
                n_open=tm.n_open,
            )
            for tm in report.per_task
        ],
        n_known=report.n_known,
        n_open=report.n_open,
    )


def _task_paths(
    task_paths: list[str] | None, manifest_path: str | None
) -> list[str]:
    if (task_paths is None) == (manifest_path is None):
        raise HTTPException(400, "exactly one of task_paths / manifest_path required")
    if manifest_path is not None:
        return read_manifest(manifest_path).task_paths
    return task_paths


@app.get("/healthz", response_model=schemas.HealthResponse)
def healthz() -> schemas.HealthResponse:
    return schemas.HealthResponse()


@app.post("/simulate", response_model=schemas.SimulateResponse)
def simulate(req: schemas.SimulateRequest) -> schemas.SimulateResponse:
    try:
        stream = generate(_scenario_config(req.config))
        manifest_path = export(stream, req.out_dir)
    except OwclError as exc:
        raise HTTPException(400, str(exc)) from exc
    manifest = read_manifest(manifest_path)
    return schemas.SimulateResponse(
        manifest_path=manifest_path,
        task_paths=manifest.task_paths,
        open_class_ids=manifest.open_class_ids,
    )


@app.post("/train", response_model=schemas.TrainResponse)
def train(req: schemas.TrainRequest) -> schemas.TrainResponse:
    try:
        paths = _task_paths(req.task_paths, req.manifest_path)
        checkpoints = train_on_files(
            paths,
            nrp=_nrp(req.nrp),
            ridge_mode=req.ridge_mode,
            ridge_lambda=req.ridge_lambda,
            ridge_scale=req.ridge_scale,
            dap=_dap(req.dap),
            search_epsilon=req.search_epsilon,
            search_max_iters=req.search_max_iters,
            run_seed_value=req.run_seed,
            out_dir=req.out_dir,
            resume_state=req.resume_state,
            start_task=req.start_task,
        )
    except OwclError as exc:
        raise HTTPException(400, str(exc)) from exc
    final = checkpoints[-1]
    state = load_state(final)
    return schemas.TrainResponse(
        checkpoint_paths=checkpoints[:-1],
        state_path=final,
        tasks_trained=len(paths),
        num_classes=state.num_classes,
        threshold_ratio=state.threshold_ratio,
        train_score_mean=state.train_score_mean,
    )


@app.post("/eval", response_model=schemas.EvalResponse)
def evaluate(req: schemas.EvalRequest) -> schemas.EvalResponse:
    try:
        paths = _task_paths(req.task_paths, req.manifest_path)
        report, report_path = eval_checkpoints(
            paths,
            checkpoint_dir=req.checkpoint_dir,
            state_path=req.state_path,
            cutoff_rule=req.cutoff_rule,
            percentile=req.percentile,
            seed_label=req.seed_label,
            out_dir=req.out_dir,
        )
    except OwclError as exc:
        raise HTTPException(400, str(exc)) from exc
    return schemas.EvalResponse(report=_report_model(report), report_path=report_path)


@app.post("/report", response_model=schemas.ReportResponse)
def report(req: schemas.ReportRequest) -> schemas.ReportResponse:
    import json

    from ..pipeline import report_from_doc

    if not req.report_paths:
        raise HTTPException(400, "report_paths must be non-empty")
    reports, seeds = [], []
    for path in req.report_paths:
        if not os.path.isfile(path):
            raise HTTPException(400, f"no such report: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        reports.append(report_from_doc(doc))
        seeds.append(doc.get("seed", len(seeds)))
    result = write_reports(reports, seeds, req.out_dir)
    return schemas.ReportResponse(
        metrics={
            name: schemas.AggregateEntry(mean=agg.mean, std=agg.std)
            for name, agg in result.aggregates.items()
        },
        aggregate_json_path=result.aggregate_json_path,
        aggregate_csv_path=result.aggregate_csv_path,
    )


@app.post("/run", response_model=schemas.RunResponse)
def run(req: schemas.RunRequest) -> schemas.RunResponse:
    output_dir = req.output_dir or os.environ.get("OWCL_OUTPUT_DIR", "")
    config = RunConfig(
        scenario=_scenario_config(req.scenario) if req.scenario else None,
        dataset_dir=req.dataset_dir,
        nrp=_nrp(req.nrp),
        ridge_mode=req.ridge_mode,
        ridge_lambda=req.ridge_lambda,
        ridge_scale=req.ridge_scale,
        dap=_dap(req.dap),
        search_epsilon=req.search_epsilon,
        search_max_iters=req.search_max_iters,
        seeds=list(req.seeds),
        output_dir=output_dir,
        mode=req.mode,
        ablation_percentile=req.ablation_percentile,
    )
    try:
        result = run_experiment(config)
    except OwclError as exc:
        raise HTTPException(400, str(exc)) from exc
    return schemas.RunResponse(
        metrics={
            name: schemas.AggregateEntry(mean=agg.mean, std=agg.std)
            for name, agg in result.aggregates.items()
        },
        report_paths=result.report_paths,
        aggregate_json_path=result.aggregate_json_path,
        aggregate_csv_path=result.aggregate_csv_path,
        per_seed=[_report_model(r) for r in result.reports],
    )
