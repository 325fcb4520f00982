"""The accumulated model: Gram matrix, class aggregates, prototypes, deviation.

All statistics are plain sums (or count-weighted means of sums), so feeding
the same samples in any batching or task order produces the same state up to
floating-point roundoff. Class prototypes are the per-class means of the
projected features: column k of the aggregate matrix divided by the count of
class k.

The state persists to a versioned binary container (magic ``OWCLSTAT``,
little-endian 64-bit floats) and round-trips exactly.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import (
    DimensionMismatchError,
    IllConditionedError,
    MissingPrototypeError,
    NoClassesError,
    OpenLabelError,
    StateFileError,
)
from .projection import IDENTITY, NONLINEARITIES, ProjectionParams, RELU

_MAGIC = b"OWCLSTAT"
_VERSION = 1
_COND_LIMIT = 1e12


@dataclass
class KnowledgeState:
    """Everything the engine remembers across tasks.

    Single-writer: update functions mutate in place (and return the state for
    chaining); concurrent readers must hold a snapshot.
    """

    projection: ProjectionParams
    ridge_lambda: float
    gram: np.ndarray  # (M, M), symmetric PSD
    class_ids: list[int]  # column order of class_aggregate
    class_aggregate: np.ndarray  # (M, K)
    class_counts: np.ndarray  # (K,) int64
    total_count: int = 0
    delta_sq: float = 0.0
    delta_count: int = 0
    threshold_ratio: float = 1.0
    calibrated: bool = False
    train_score_mean: float = 0.0
    train_scores: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def feature_dim(self) -> int:
        return self.gram.shape[0]

    @property
    def num_classes(self) -> int:
        return len(self.class_ids)

    def column_of(self, class_id: int) -> int:
        try:
            return self.class_ids.index(class_id)
        except ValueError:
            raise MissingPrototypeError(f"no prototype for class {class_id}") from None


@dataclass(frozen=True)
class Prototype:
    """Projected-space class mean: aggregate column / class count."""

    class_id: int
    vector: np.ndarray


def init_state(projection: ProjectionParams, ridge_lambda: float = 1.0) -> KnowledgeState:
    """Fresh state: zero Gram, no classes, deviation 0, threshold ratio 1."""
    if ridge_lambda <= 0:
        raise ValueError(f"ridge_lambda must be positive, got {ridge_lambda}")
    m = projection.output_dim
    return KnowledgeState(
        projection=projection,
        ridge_lambda=float(ridge_lambda),
        gram=np.zeros((m, m)),
        class_ids=[],
        class_aggregate=np.zeros((m, 0)),
        class_counts=np.zeros(0, dtype=np.int64),
    )


def prototypes_matrix(state: KnowledgeState) -> np.ndarray:
    """(M, K) matrix whose column k is the class-k prototype."""
    if state.num_classes == 0:
        return np.zeros((state.feature_dim, 0))
    return state.class_aggregate / state.class_counts[np.newaxis, :]


def prototype(state: KnowledgeState, class_id: int) -> Prototype:
    col = state.column_of(class_id)
    vec = state.class_aggregate[:, col] / state.class_counts[col]
    return Prototype(class_id, vec)


def _check_batch(state: KnowledgeState, h: np.ndarray, labels: list[int | None]) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != state.feature_dim:
        raise DimensionMismatchError(
            f"batch shape {h.shape} incompatible with feature dim {state.feature_dim}"
        )
    if h.shape[0] != len(labels):
        raise DimensionMismatchError(f"{h.shape[0]} rows vs {len(labels)} labels")
    if any(lbl is None for lbl in labels):
        raise OpenLabelError("open marker in a training batch")
    return h


def update_gram_and_aggregates(
    state: KnowledgeState, h: np.ndarray, labels: list[int | None]
) -> KnowledgeState:
    """Accumulate gram += H^T H and per-class feature sums for one batch.

    New classes get fresh zero columns, in order of first appearance.
    """
    h = _check_batch(state, h, labels)
    if h.shape[0] == 0:
        return state
    for lbl in labels:
        if lbl not in state.class_ids:
            state.class_ids.append(int(lbl))
            state.class_aggregate = np.hstack(
                [state.class_aggregate, np.zeros((state.feature_dim, 1))]
            )
            state.class_counts = np.append(state.class_counts, 0)
    state.gram += h.T @ h
    label_arr = np.asarray(labels)
    for lbl in np.unique(label_arr):
        col = state.class_ids.index(int(lbl))
        mask = label_arr == lbl
        state.class_aggregate[:, col] += h[mask].sum(axis=0)
        state.class_counts[col] += int(mask.sum())
    state.total_count += h.shape[0]
    return state


def update_delta(
    state: KnowledgeState, h: np.ndarray, labels: list[int | None]
) -> KnowledgeState:
    """Fold one batch's mean squared sample-to-prototype distance into delta_sq.

    Must run after update_gram_and_aggregates so every label has a prototype.
    delta_sq is the count-weighted running mean of squared distances, so its
    square root is the deviation scale used for pseudo-sample noise.
    """
    h = _check_batch(state, h, labels)
    n = h.shape[0]
    if n == 0:
        return state
    protos = prototypes_matrix(state)
    cols = np.array([state.column_of(int(lbl)) for lbl in labels])
    diff = h - protos[:, cols].T
    batch_msd = float(np.mean(np.sum(diff * diff, axis=1)))
    prev = state.delta_count
    state.delta_sq = (state.delta_sq * prev + batch_msd * n) / (prev + n)
    state.delta_count = prev + n
    return state


def _condition_estimate(a: np.ndarray, lam: float) -> float:
    # A = G + lam*I with G PSD, so eig_min >= lam; estimate eig_max by a few
    # power iterations from a fixed start vector (deterministic).
    v = np.ones(a.shape[0]) / np.sqrt(a.shape[0])
    for _ in range(8):
        w = a @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 1.0
        v = w / nw
    return float(v @ (a @ v)) / lam


def decode_weights(state: KnowledgeState) -> np.ndarray:
    """Ridge-decoded class weights: column y solves (G + lambda I) w = p_y.

    One Cholesky factorization is shared across all class columns; no
    explicit inverse is formed.
    """
    if state.num_classes == 0:
        raise NoClassesError("decode_weights needs at least one trained class")
    a = state.gram + state.ridge_lambda * np.eye(state.feature_dim)
    cond = _condition_estimate(a, state.ridge_lambda)
    if cond > _COND_LIMIT:
        raise IllConditionedError(
            f"condition estimate {cond:.3e} exceeds {_COND_LIMIT:.0e}"
        )
    try:
        factor = cho_factor(a, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded by lambda > 0
        raise IllConditionedError(f"Cholesky failed: {exc}") from exc
    return cho_solve(factor, prototypes_matrix(state))


def decision_weights(state: KnowledgeState, weights: np.ndarray | None = None) -> np.ndarray:
    """Count-invariant decision columns: (G + lambda I)^-1 @ class_aggregate.

    Column y equals decode_weights column y times count_y, which is the
    one-hot ridge-regression decoder. Its training-sample logits sit near 1
    for every class regardless of class size, so a single global threshold
    stays meaningful when class counts are imbalanced (recurring classes).
    """
    if weights is None:
        weights = decode_weights(state)
    return weights * state.class_counts


def _pack_array(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def save_state(state: KnowledgeState, path: str | os.PathLike) -> None:
    """Serialize to the OWCLSTAT v1 binary container."""
    p = state.projection
    d, m = p.input_dim, p.output_dim
    k = state.num_classes
    nl_code = {RELU: 0, IDENTITY: 1}[p.nonlinearity]
    head = struct.pack(
        "<8sIIqdIIdddqBqdqI",
        _MAGIC,
        _VERSION,
        nl_code,
        p.seed,
        p.sigma_w,
        d,
        m,
        state.ridge_lambda,
        state.delta_sq,
        state.threshold_ratio,
        state.delta_count,
        1 if state.calibrated else 0,
        state.total_count,
        state.train_score_mean,
        len(state.train_scores),
        k,
    )
    parts = [head]
    for cid, cnt in zip(state.class_ids, state.class_counts):
        parts.append(struct.pack("<qq", int(cid), int(cnt)))
    parts.append(_pack_array(p.matrix))
    parts.append(_pack_array(state.gram))
    parts.append(_pack_array(state.class_aggregate))
    parts.append(_pack_array(state.train_scores))
    with open(os.fspath(path), "wb") as fh:
        fh.write(b"".join(parts))


def load_state(path: str | os.PathLike) -> KnowledgeState:
    """Load an OWCLSTAT v1 file; load(save(s)) reproduces s exactly."""
    with open(os.fspath(path), "rb") as fh:
        blob = fh.read()
    head_fmt = "<8sIIqdIIdddqBqdqI"
    head_size = struct.calcsize(head_fmt)
    if len(blob) < head_size:
        raise StateFileError("truncated state file")
    (
        magic,
        version,
        nl_code,
        seed,
        sigma_w,
        d,
        m,
        ridge_lambda,
        delta_sq,
        threshold_ratio,
        delta_count,
        calibrated,
        total_count,
        train_score_mean,
        n_scores,
        k,
    ) = struct.unpack_from(head_fmt, blob)
    if magic != _MAGIC:
        raise StateFileError(f"bad magic {magic!r}; not a model-state file")
    if version != _VERSION:
        raise StateFileError(f"unsupported state version {version}")
    if nl_code not in (0, 1):
        raise StateFileError(f"bad nonlinearity code {nl_code}")
    offset = head_size
    class_ids: list[int] = []
    counts = np.zeros(k, dtype=np.int64)
    for i in range(k):
        cid, cnt = struct.unpack_from("<qq", blob, offset)
        offset += 16
        class_ids.append(cid)
        counts[i] = cnt
    expected = offset + 8 * (d * m + m * m + m * k + n_scores)
    if len(blob) != expected:
        raise StateFileError(
            f"corrupt state file: {len(blob)} bytes, expected {expected}"
        )

    def take(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape)) if shape else 0
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        offset += 8 * count
        return arr.reshape(shape).astype(np.float64)

    matrix = take((d, m))
    matrix.flags.writeable = False
    gram = take((m, m))
    aggregate = take((m, k))
    scores = take((n_scores,))
    projection = ProjectionParams(matrix, NONLINEARITIES[nl_code], seed, sigma_w)
    return KnowledgeState(
        projection=projection,
        ridge_lambda=ridge_lambda,
        gram=gram,
        class_ids=class_ids,
        class_aggregate=aggregate,
        class_counts=counts,
        total_count=total_count,
        delta_sq=delta_sq,
        delta_count=delta_count,
        threshold_ratio=threshold_ratio,
        calibrated=bool(calibrated),
        train_score_mean=train_score_mean,
        train_scores=scores,
    )


def scaled_ridge_lambda(state: KnowledgeState, scale: float = 0.1) -> float:
    """Ridge strength tracking the data mass: scale * trace(G) / M.

    trace(G)/M is the mean Gram eigenvalue, so the shrinkage keeps pace with
    the accumulated feature energy. A fixed small lambda stops regularizing
    once the sample count approaches M (the fit interpolates and responses
    on novel directions become arbitrary); this scaling avoids that regime.
    The result is order-invariant because trace(G) is a plain sum.
    """
    if state.total_count == 0:
        return state.ridge_lambda
    return max(scale * float(np.trace(state.gram)) / state.feature_dim, 1e-12)


def pick_ridge_lambda(state: KnowledgeState, h: np.ndarray, labels: list[int]) -> float:
    """Sweep lambda over powers of 10 in [1e-4, 1e4], minimizing the one-hot
    ridge-regression residual ||H (G+lambda I)^-1 C - Y||_F on this batch."""
    h = np.asarray(h, dtype=np.float64)
    y = np.zeros((h.shape[0], state.num_classes))
    for i, lbl in enumerate(labels):
        y[i, state.column_of(int(lbl))] = 1.0
    best_lam, best_res = state.ridge_lambda, np.inf
    for exp in range(-4, 5):
        lam = 10.0**exp
        a = state.gram + lam * np.eye(state.feature_dim)
        try:
            factor = cho_factor(a, lower=True)
        except np.linalg.LinAlgError:
            continue
        w = cho_solve(factor, state.class_aggregate)
        res = float(np.linalg.norm(h @ w - y))
        if res < best_res:
            best_lam, best_res = lam, res
    return best_lam
