"""Frozen nonlinear random projection of embeddings into a wider space.

The projection matrix is drawn once from a seeded Gaussian and never changes
afterwards; all tasks share it. Seeding uses numpy's PCG64 generator
(``numpy.random.default_rng``), whose bit stream is specified and stable
across platforms, so identical (d, M, seed, sigma_w) always reproduce the
same matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatchError

RELU = "relu"
IDENTITY = "identity"
NONLINEARITIES = (RELU, IDENTITY)


@dataclass(frozen=True)
class ProjectionParams:
    """The random matrix plus the nonlinearity applied after it."""

    matrix: np.ndarray  # (d, M), read-only
    nonlinearity: str
    seed: int
    sigma_w: float

    @property
    def input_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def output_dim(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class ProjectedBatch:
    """Projected features with their labels, as produced for one batch."""

    features: np.ndarray  # (n, M)
    labels: list[int | None]

    def __post_init__(self):
        if self.features.shape[0] != len(self.labels):
            raise DimensionMismatchError(
                f"{self.features.shape[0]} feature rows vs {len(self.labels)} labels"
            )


def init_projection(
    d: int, m: int, seed: int, sigma_w: float = 1.0, nonlinearity: str = RELU
) -> ProjectionParams:
    """Draw a d x M matrix with i.i.d. N(0, sigma_w^2) entries from `seed`."""
    if d < 1 or m < 1:
        raise ConfigError(f"projection dims must be >= 1, got d={d}, M={m}")
    if sigma_w <= 0:
        raise ConfigError(f"sigma_w must be positive, got {sigma_w}")
    if nonlinearity not in NONLINEARITIES:
        raise ConfigError(f"unknown nonlinearity {nonlinearity!r}")
    rng = np.random.default_rng(seed)
    matrix = rng.normal(0.0, sigma_w, size=(d, m))
    matrix.flags.writeable = False
    return ProjectionParams(matrix, nonlinearity, int(seed), float(sigma_w))


def project(batch: np.ndarray, params: ProjectionParams) -> np.ndarray:
    """Apply g(batch @ W) row-wise. `batch` is (n, d); the result is (n, M)."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != params.input_dim:
        raise DimensionMismatchError(
            f"batch shape {batch.shape} incompatible with projection "
            f"({params.input_dim}, {params.output_dim})"
        )
    out = batch @ params.matrix
    if params.nonlinearity == RELU:
        np.maximum(out, 0.0, out=out)
    return out


def check_inner_product_concentration(
    f: np.ndarray, f_prime: np.ndarray, m: int, trials: int, seed: int
) -> float:
    """Monte-Carlo mean of (W^T f)^T (W^T f') / (M sigma^2) over fresh draws of W.

    Uses the identity nonlinearity and sigma_w = 1; the expectation equals
    f^T f', and the average converges to it at the usual 1/sqrt(trials) rate.
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    f = np.asarray(f, dtype=np.float64)
    f_prime = np.asarray(f_prime, dtype=np.float64)
    if f.shape != f_prime.shape or f.ndim != 1:
        raise DimensionMismatchError(
            f"vectors must be 1-D of equal length, got {f.shape} and {f_prime.shape}"
        )
    d = f.shape[0]
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(trials):
        w = rng.normal(0.0, 1.0, size=(d, m))
        total += float((f @ w) @ (f_prime @ w)) / m
    return total / trials
