"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class NrpModel(BaseModel):
    m: int = 2500
    seed: int = 0
    sigma_w: float = 1.0
    nonlinearity: str = "relu"


class DapModel(BaseModel):
    n_positive_per_class: int = 64
    n_negative_per_pair: int = 8
    zeta_lo: float = 0.8
    zeta_hi: float = 1.25
    pair_cap: int = 512
    seed: int = 0


class ScenarioModel(BaseModel):
    scenario: str
    dimension: int
    num_tasks: int
    classes_per_task: int
    train_per_class: int
    test_per_class: int
    num_open_classes: int
    class_separation: float = 8.0
    within_class_sigma: float = 1.0
    drift_magnitude: float = 0.0
    recurrence_rate: float = 0.0
    nuisance_rank: int = 0
    nuisance_sigma: float = 0.0
    seed: int = 0


class SimulateRequest(BaseModel):
    config: ScenarioModel
    out_dir: str


class SimulateResponse(BaseModel):
    manifest_path: str
    task_paths: list[str]
    open_class_ids: list[int]


class TrainRequest(BaseModel):
    task_paths: list[str] | None = None
    manifest_path: str | None = None
    out_dir: str
    nrp: NrpModel = Field(default_factory=NrpModel)
    ridge_mode: str = "scaled"
    ridge_lambda: float = 1.0
    ridge_scale: float = 0.1
    dap: DapModel = Field(default_factory=DapModel)
    search_epsilon: float = 1e-3
    search_max_iters: int = 100
    run_seed: int = 0
    resume_state: str | None = None
    start_task: int = 0


class TrainResponse(BaseModel):
    checkpoint_paths: list[str]
    state_path: str
    tasks_trained: int
    num_classes: int
    threshold_ratio: float
    train_score_mean: float


class EvalRequest(BaseModel):
    task_paths: list[str] | None = None
    manifest_path: str | None = None
    checkpoint_dir: str | None = None
    state_path: str | None = None
    cutoff_rule: str = "calibrated"
    percentile: float = 0.05
    seed_label: int = 0
    out_dir: str


class TaskMetricsModel(BaseModel):
    task: int
    acc: float | None
    auc: float | None
    fpr: float | None
    n_known: int
    n_open: int


class ReportModel(BaseModel):
    acc: float | None
    auc: float | None
    fpr: float | None
    pooled_acc: float | None
    pooled_auc: float | None
    pooled_fpr: float | None
    per_task: list[TaskMetricsModel]
    n_known: int
    n_open: int


class EvalResponse(BaseModel):
    report: ReportModel
    report_path: str


class ReportRequest(BaseModel):
    report_paths: list[str]
    out_dir: str


class AggregateEntry(BaseModel):
    mean: float
    std: float | None


class ReportResponse(BaseModel):
    metrics: dict[str, AggregateEntry]
    aggregate_json_path: str
    aggregate_csv_path: str


class RunRequest(BaseModel):
    scenario: ScenarioModel | None = None
    dataset_dir: str | None = None
    nrp: NrpModel = Field(default_factory=NrpModel)
    ridge_mode: str = "scaled"
    ridge_lambda: float = 1.0
    ridge_scale: float = 0.1
    dap: DapModel = Field(default_factory=DapModel)
    search_epsilon: float = 1e-3
    search_max_iters: int = 100
    seeds: list[int] = Field(default_factory=lambda: [0])
    output_dir: str = ""
    mode: str = "full"
    ablation_percentile: float = 0.05


class RunResponse(BaseModel):
    metrics: dict[str, AggregateEntry]
    report_paths: list[str]
    aggregate_json_path: str
    aggregate_csv_path: str
    per_seed: list[ReportModel]


class HealthResponse(BaseModel):
    status: str = "ok"
