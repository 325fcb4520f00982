"""Streaming open-world continual-learning engine.

Sub-modules:

- ``dataio``: labeled-embedding text format (read/write/validate)
- ``projection``: frozen nonlinear random projection
- ``state``: incremental Gram/aggregate/deviation statistics and persistence
- ``scoring``: similarity scores and the known-vs-open verdict
- ``pseudo``: pseudo-sample generation for threshold calibration
- ``threshold``: ternary-search threshold calibration
- ``scenarios``: synthetic task-stream generator (CINO/CIRO/KINO/KIRO)
- ``metrics``: accuracy / AUC / FPR and multi-seed aggregation
- ``pipeline``: end-to-end orchestration and report files
- ``service``: FastAPI wrapper; ``cli``: thin command-line client
"""

from .dataio import EmbeddingRecord, TaskDataset, read_dataset, write_dataset
from .metrics import EvalRecord, MetricsReport, accuracy, aggregate, auc, fpr
from .pipeline import RunConfig, run_experiment
from .projection import (
    ProjectedBatch,
    ProjectionParams,
    check_inner_product_concentration,
    init_projection,
    project,
)
from .pseudo import (
    CalibrationSet,
    PseudoConfig,
    PseudoSample,
    build_calibration_set,
    generate_negative,
    generate_positive,
    pseudo_prototype,
)
from .scenarios import ScenarioConfig, ScenarioStream, export, generate
from .scoring import ScoredSample, classify, classify_ablated, score
from .state import (
    KnowledgeState,
    Prototype,
    decode_weights,
    init_state,
    load_state,
    save_state,
    update_delta,
    update_gram_and_aggregates,
)
from .threshold import SearchConfig, calibrate, objective, ternary_search

__version__ = "0.1.0"
