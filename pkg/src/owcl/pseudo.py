"""Pseudo-sample generation for threshold calibration.

Positive surrogates are Gaussian draws around each class prototype; negative
surrogates are draws around points strictly between prototype pairs. Both
live in the projected feature space (prototypes only exist there) and are
used solely to pick the threshold ratio: they never touch the Gram matrix,
aggregates, deviation, or any reported metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotEnoughClassesError
from .state import KnowledgeState, prototypes_matrix

KNOWN_SURROGATE = "known_surrogate"
OPEN_SURROGATE = "open_surrogate"

_SEED_MASK = (1 << 63) - 1


def _substream(seed: int, *salt: int) -> np.random.Generator:
    # Per-class / per-pair derived streams: deterministic and independent.
    return np.random.default_rng(np.random.SeedSequence((seed & _SEED_MASK, *salt)))


@dataclass(frozen=True)
class PseudoSample:
    """One surrogate vector. Positives name a class; negatives a class pair."""

    vector: np.ndarray
    tag: str  # KNOWN_SURROGATE or OPEN_SURROGATE
    source_class: int | None = None
    source_pair: tuple[int, int] | None = None
    zeta: float | None = None

    def __post_init__(self):
        if self.tag == KNOWN_SURROGATE and self.source_class is None:
            raise ValueError("known surrogate must name its source class")
        if self.tag == OPEN_SURROGATE:
            if self.source_pair is None or self.source_pair[0] == self.source_pair[1]:
                raise ValueError("open surrogate must name a pair of distinct classes")


@dataclass
class CalibrationSet:
    samples: list[PseudoSample]
    seed: int


@dataclass(frozen=True)
class PseudoConfig:
    """Counts, blend range, pair cap, and seed for calibration-set assembly.

    The blend-coefficient range is a symmetric band around the midpoint on
    the log scale (1/1.25 = 0.8). Wider bands put negatives so close to a
    prototype that the threshold search turns overly conservative and
    rejects real known samples.
    """

    n_positive_per_class: int = 64
    n_negative_per_pair: int = 8
    zeta_range: tuple[float, float] = (0.8, 1.25)
    pair_cap: int = 512
    seed: int = 0


def pseudo_prototype(p_k: np.ndarray, p_l: np.ndarray, zeta: float) -> np.ndarray:
    """Blend point (p_k + zeta * p_l) / (1 + zeta), strictly between the two."""
    if zeta <= 0:
        raise ValueError(f"zeta must be positive, got {zeta}")
    return (np.asarray(p_k, dtype=np.float64) + zeta * np.asarray(p_l, dtype=np.float64)) / (
        1.0 + zeta
    )


def generate_positive(
    p_k: np.ndarray,
    delta_sq: float,
    n: int,
    seed: int | np.random.SeedSequence,
    class_id: int = 0,
) -> list[PseudoSample]:
    """n i.i.d. draws from N(p_k, delta_sq * I), tagged as known surrogates."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if delta_sq < 0:
        raise ValueError(f"delta_sq must be >= 0, got {delta_sq}")
    p_k = np.asarray(p_k, dtype=np.float64)
    rng = np.random.default_rng(seed)
    sigma = np.sqrt(delta_sq)
    draws = p_k[np.newaxis, :] + sigma * rng.standard_normal((n, p_k.shape[0]))
    return [PseudoSample(v, KNOWN_SURROGATE, source_class=class_id) for v in draws]


def generate_negative(
    prototypes: list[tuple[int, np.ndarray]],
    delta_sq: float,
    n_per_pair: int,
    zeta_range: tuple[float, float],
    seed: int,
    pair_cap: int | None = None,
) -> list[PseudoSample]:
    """Draws around blend points of prototype pairs, tagged as open surrogates.

    Every unordered pair contributes n_per_pair samples, each around a fresh
    blend point with zeta drawn uniformly from zeta_range. When the pair
    count exceeds pair_cap, only the pairs with the smallest prototype
    distance are kept (the hardest ones for the threshold).
    """
    if len(prototypes) < 2:
        raise NotEnoughClassesError("negative surrogates need at least two prototypes")
    lo, hi = zeta_range
    if not 0 < lo <= hi:
        raise ValueError(f"zeta_range must satisfy 0 < lo <= hi, got {zeta_range}")
    pairs = [
        (i, j) for i in range(len(prototypes)) for j in range(i + 1, len(prototypes))
    ]
    if pair_cap is not None and len(pairs) > pair_cap:
        def distance(pair):
            return float(
                np.linalg.norm(prototypes[pair[0]][1] - prototypes[pair[1]][1])
            )

        pairs.sort(key=lambda pr: (distance(pr), pr))
        pairs = pairs[:pair_cap]
    sigma = np.sqrt(delta_sq)
    out: list[PseudoSample] = []
    for i, j in pairs:
        k_id, p_k = prototypes[i]
        l_id, p_l = prototypes[j]
        rng = _substream(seed, 1, int(k_id), int(l_id))
        zetas = rng.uniform(lo, hi, size=n_per_pair)
        noise = rng.standard_normal((n_per_pair, p_k.shape[0]))
        for z, eps in zip(zetas, noise):
            center = pseudo_prototype(p_k, p_l, float(z))
            out.append(
                PseudoSample(
                    center + sigma * eps,
                    OPEN_SURROGATE,
                    source_pair=(int(k_id), int(l_id)),
                    zeta=float(z),
                )
            )
    return out


def build_calibration_set(state: KnowledgeState, config: PseudoConfig) -> CalibrationSet:
    """Positives for every class plus negatives for (capped) prototype pairs,
    shuffled under the seed. Requires at least two trained classes.

    delta_sq is the mean squared full-vector distance to the prototype, so
    the isotropic surrogate noise gets variance delta_sq / M per coordinate,
    which reproduces that radial scale in M dimensions.
    """
    if state.num_classes < 2:
        raise NotEnoughClassesError(
            f"calibration needs >= 2 classes, state has {state.num_classes}"
        )
    noise_var = state.delta_sq / state.feature_dim
    protos = prototypes_matrix(state)
    named = [(cid, protos[:, i]) for i, cid in enumerate(state.class_ids)]
    samples: list[PseudoSample] = []
    for cid, vec in named:
        samples.extend(
            generate_positive(
                vec,
                noise_var,
                config.n_positive_per_class,
                np.random.SeedSequence((config.seed & _SEED_MASK, 0, int(cid))),
                class_id=int(cid),
            )
        )
    samples.extend(
        generate_negative(
            named,
            noise_var,
            config.n_negative_per_pair,
            config.zeta_range,
            config.seed,
            pair_cap=config.pair_cap,
        )
    )
    rng = _substream(config.seed, 2)
    order = rng.permutation(len(samples))
    return CalibrationSet([samples[i] for i in order], config.seed)
