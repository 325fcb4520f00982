"""Synthetic task streams for the four open-world learning scenarios.

The two scenario axes are whether known classes recur across tasks (with a
shifted distribution) and whether open classes recur across test splits:

======== ======================= =========================
preset   known classes recur     open samples recur
======== ======================= =========================
CINO     no                      no (fresh open per task)
CIRO     no                      yes
KINO     yes (with drift)        no
KIRO     yes (with drift)        yes
======== ======================= =========================

Classes are isotropic Gaussian clusters. Class means sit on a scaled
hypercube lattice with a small jitter, so all pairwise mean distances are at
least ~class_separation * sigma; with a separation of 8 a nearest-mean
classifier on the raw data is essentially Bayes-optimal, which keeps every
pipeline-level acceptance bound attributable to the pipeline rather than the
data. Each task's test split covers every class trained so far (drawn from
the class's current, possibly drifted, mean) plus open samples labeled with
the open marker. Everything is derived from the config seed.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .dataio import TEST, TRAIN, EmbeddingRecord, TaskDataset, write_dataset
from .errors import ConfigError, FormatError

CINO = "CINO"
CIRO = "CIRO"
KINO = "KINO"
KIRO = "KIRO"
SCENARIOS = (CINO, CIRO, KINO, KIRO)

_KIL = (KINO, KIRO)  # known classes recur
_RECURRING_OPEN = (CIRO, KIRO)  # open classes recur

_SEED_MASK = (1 << 63) - 1
_MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class ScenarioConfig:
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
    # Optional shared nuisance subspace: every sample (any class, any task)
    # gets extra noise of scale nuisance_sigma along nuisance_rank fixed
    # random directions, mimicking backbone nuisance factors (pose,
    # lighting). Defaults keep the clusters isotropic.
    nuisance_rank: int = 0
    nuisance_sigma: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if min(self.dimension, self.num_tasks, self.classes_per_task) < 1:
            raise ConfigError("dimension, num_tasks, classes_per_task must be >= 1")
        if min(self.train_per_class, self.test_per_class) < 1:
            raise ConfigError("per-class sample counts must be >= 1")
        if self.class_separation <= 0 or self.within_class_sigma <= 0:
            raise ConfigError("class_separation and within_class_sigma must be positive")
        if self.drift_magnitude < 0:
            raise ConfigError("drift_magnitude must be >= 0")
        if not 0.0 <= self.recurrence_rate <= 1.0:
            raise ConfigError("recurrence_rate must lie in [0, 1]")
        if self.scenario in _KIL:
            if self.recurrence_rate == 0.0:
                raise ConfigError(f"{self.scenario} requires recurrence_rate > 0")
        else:
            if self.recurrence_rate != 0.0 or self.drift_magnitude != 0.0:
                raise ConfigError(
                    f"{self.scenario} forbids recurrence and drift "
                    f"(got rate={self.recurrence_rate}, drift={self.drift_magnitude})"
                )
        min_open = self.num_tasks if self.scenario not in _RECURRING_OPEN else 1
        if self.num_open_classes < min_open:
            raise ConfigError(
                f"{self.scenario} needs >= {min_open} open classes, "
                f"got {self.num_open_classes}"
            )
        if not 0 <= self.nuisance_rank <= self.dimension:
            raise ConfigError("nuisance_rank must lie in [0, dimension]")
        if self.nuisance_sigma < 0:
            raise ConfigError("nuisance_sigma must be >= 0")


@dataclass
class ScenarioStream:
    scenario: str
    seed: int
    dimension: int
    tasks: list[TaskDataset]
    ground_truth_open_ids: frozenset[int]
    open_schedule: list[tuple[int, ...]]  # open class ids in each task's test
    class_means: list[dict[int, np.ndarray]] = field(default_factory=list)
    # class_means[t] maps each class trained in task t to the mean its train
    # samples were drawn from (recurrences show the drifted mean).


def _rng(seed: int, *salt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed & _SEED_MASK, *salt)))


def _lattice_means(
    n_points: int, dim: int, spacing: float, rng: np.random.Generator
) -> list[np.ndarray]:
    """Class means on a scaled hypercube lattice with jitter.

    Preferred placement: distinct two-hot corners (equal norms, pairwise
    Hamming distance >= 2, so pairwise Euclidean distance >= spacing after
    scaling). Equal norms keep per-class score scales comparable, which a
    single global threshold relies on. Small dimensions without enough
    two-hot corners fall back to a base-B integer lattice.
    """
    if dim >= 2 and dim * (dim - 1) // 2 >= n_points:
        scale = spacing / np.sqrt(2.0)
        pairs = [(i, j) for i in range(dim) for j in range(i + 1, dim)]
        order = [pairs[int(i)] for i in rng.permutation(len(pairs))]
        # Greedy: prefer corners on coordinates no other class uses yet, so
        # class directions stay as close to mutually orthogonal as the
        # dimension allows (mirrors how embedding-space class directions
        # spread out in practice).
        use = np.zeros(dim, dtype=np.int64)
        chosen_pairs = []
        for _ in range(n_points):
            best = min(order, key=lambda ab: int(use[ab[0]] + use[ab[1]]))
            order.remove(best)
            use[best[0]] += 1
            use[best[1]] += 1
            chosen_pairs.append(best)
        means = []
        for a, b in chosen_pairs:
            v = np.zeros(dim)
            v[a] = scale
            v[b] = scale
            means.append(v + rng.uniform(-0.05, 0.05, size=dim) * scale)
        return means
    base = 2
    while base**dim < n_points:
        base += 1
    universe = base**dim
    order = rng.permutation(universe if universe < 4 * n_points else 4 * n_points)
    chosen: list[int] = []
    seen: set[int] = set()
    for p in order:
        p = int(p)
        if p not in seen:
            seen.add(p)
            chosen.append(p)
        if len(chosen) == n_points:
            break
    means = []
    for p in chosen:
        coords = np.empty(dim)
        for i in range(dim):
            coords[i] = p % base
            p //= base
        jitter = rng.uniform(-0.05, 0.05, size=dim) * spacing
        means.append(coords * spacing + jitter)
    return means


def _unit_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def generate(config: ScenarioConfig) -> ScenarioStream:
    """Build the full task stream for one scenario config, deterministically."""
    config.validate()
    cpt = config.classes_per_task
    t_total = config.num_tasks

    schedule_rng = _rng(config.seed, 0)
    train_schedule: list[list[int]] = []
    introduced: list[int] = []
    next_id = 0
    for t in range(t_total):
        if config.scenario in _KIL and t > 0:
            n_rec = max(1, round(config.recurrence_rate * cpt))
            n_rec = min(n_rec, cpt, len(introduced))
            recur = sorted(
                int(c) for c in schedule_rng.choice(introduced, size=n_rec, replace=False)
            )
        else:
            recur = []
        fresh = list(range(next_id, next_id + cpt - len(recur)))
        next_id += len(fresh)
        introduced.extend(fresh)
        train_schedule.append(recur + fresh)

    n_known = next_id
    open_ids = list(range(n_known, n_known + config.num_open_classes))
    if config.scenario in _RECURRING_OPEN:
        open_schedule = [tuple(open_ids) for _ in range(t_total)]
    else:
        open_schedule = [(open_ids[t],) for t in range(t_total)]

    spacing = config.class_separation * config.within_class_sigma
    placement_rng = _rng(config.seed, 1)
    all_means = _lattice_means(
        n_known + config.num_open_classes, config.dimension, spacing, placement_rng
    )
    current_mean = {cid: all_means[cid] for cid in range(len(all_means))}

    sigma = config.within_class_sigma
    nuisance_basis = None
    if config.nuisance_rank > 0 and config.nuisance_sigma > 0:
        raw = _rng(config.seed, 4).standard_normal(
            (config.dimension, config.nuisance_rank)
        )
        nuisance_basis = np.linalg.qr(raw)[0]

    def _draw(mean: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        out = mean + sigma * rng.standard_normal((n, config.dimension))
        if nuisance_basis is not None:
            coeff = config.nuisance_sigma * rng.standard_normal(
                (n, config.nuisance_rank)
            )
            out += coeff @ nuisance_basis.T
        return out
    tasks: list[TaskDataset] = []
    per_task_means: list[dict[int, np.ndarray]] = []
    trained_so_far: list[int] = []
    for t in range(t_total):
        drift_rng = _rng(config.seed, 2, t)
        sample_rng = _rng(config.seed, 3, t)
        task_means: dict[int, np.ndarray] = {}
        train_records: list[EmbeddingRecord] = []
        for cid in train_schedule[t]:
            if cid in trained_so_far and config.drift_magnitude > 0:
                shift = config.drift_magnitude * sigma * _unit_vector(
                    config.dimension, drift_rng
                )
                current_mean[cid] = current_mean[cid] + shift
            task_means[cid] = current_mean[cid].copy()
            draws = _draw(current_mean[cid], config.train_per_class, sample_rng)
            train_records.extend(
                EmbeddingRecord(v, cid, t, TRAIN) for v in draws
            )
        for cid in train_schedule[t]:
            if cid not in trained_so_far:
                trained_so_far.append(cid)

        test_records: list[EmbeddingRecord] = []
        for cid in sorted(trained_so_far):
            draws = _draw(current_mean[cid], config.test_per_class, sample_rng)
            test_records.extend(EmbeddingRecord(v, cid, t, TEST) for v in draws)
        scheduled = open_schedule[t]
        per_open = max(1, config.test_per_class // len(scheduled))
        for oid in scheduled:
            draws = _draw(current_mean[oid], per_open, sample_rng)
            test_records.extend(EmbeddingRecord(v, None, t, TEST) for v in draws)

        ds = TaskDataset(
            task_id=t, dimension=config.dimension, train=train_records, test=test_records
        )
        ds.validate()
        tasks.append(ds)
        per_task_means.append(task_means)

    stream = ScenarioStream(
        scenario=config.scenario,
        seed=config.seed,
        dimension=config.dimension,
        tasks=tasks,
        ground_truth_open_ids=frozenset(open_ids),
        open_schedule=open_schedule,
        class_means=per_task_means,
    )
    validate_stream(stream)
    return stream


def validate_stream(stream: ScenarioStream) -> None:
    """Assert the scenario axioms; raises ConfigError on violation."""
    train_sets = [ds.class_set for ds in stream.tasks]
    for s in train_sets:
        if s & stream.ground_truth_open_ids:
            raise ConfigError("open class id appeared in a train split")
    if stream.scenario in (CINO, CIRO):
        for i in range(len(train_sets)):
            for j in range(i + 1, len(train_sets)):
                if train_sets[i] & train_sets[j]:
                    raise ConfigError(
                        f"{stream.scenario}: train class sets of tasks "
                        f"{i} and {j} overlap"
                    )
    appearances: dict[int, int] = {}
    for scheduled in stream.open_schedule:
        for oid in scheduled:
            appearances[oid] = appearances.get(oid, 0) + 1
    if stream.scenario in _RECURRING_OPEN:
        if len(stream.tasks) > 1 and not any(v >= 2 for v in appearances.values()):
            raise ConfigError(f"{stream.scenario}: no open class recurs in tests")
    else:
        if any(v > 1 for v in appearances.values()):
            raise ConfigError(f"{stream.scenario}: an open class recurs in tests")


def export(stream: ScenarioStream, out_dir: str | os.PathLike) -> str:
    """Write one task file per task plus a manifest; returns the manifest path."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for ds in stream.tasks:
        name = f"task_{ds.task_id:03d}.owcl"
        write_dataset(ds, os.path.join(out_dir, name))
        entries.append(
            {
                "task_id": ds.task_id,
                "path": name,
                "train_classes": sorted(ds.class_set),
                "open_ids_in_test": sorted(stream.open_schedule[ds.task_id])
                if ds.task_id < len(stream.open_schedule)
                else [],
            }
        )
    manifest = {
        "format": "owcl-scenario",
        "version": 1,
        "scenario": stream.scenario,
        "seed": stream.seed,
        "dimension": stream.dimension,
        "open_class_ids": sorted(stream.ground_truth_open_ids),
        "tasks": entries,
    }
    manifest_path = os.path.join(out_dir, _MANIFEST_NAME)
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


@dataclass
class StreamManifest:
    scenario: str
    seed: int
    dimension: int
    open_class_ids: list[int]
    task_paths: list[str]  # absolute, in task order


def read_manifest(path: str | os.PathLike) -> StreamManifest:
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"manifest is not valid JSON: {exc}", path) from exc
    if doc.get("format") != "owcl-scenario" or doc.get("version") != 1:
        raise FormatError("not an owcl-scenario v1 manifest", path)
    base = os.path.dirname(os.path.abspath(path))
    entries = sorted(doc["tasks"], key=lambda e: e["task_id"])
    return StreamManifest(
        scenario=doc["scenario"],
        seed=doc["seed"],
        dimension=doc["dimension"],
        open_class_ids=list(doc["open_class_ids"]),
        task_paths=[os.path.join(base, e["path"]) for e in entries],
    )
