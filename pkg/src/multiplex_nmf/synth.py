"""Planted-partition multiplex benchmarks.

SYNTH-C layers carry complementary information: each layer has one weak
community, a different one in each layer. SYNTH-N layers differ in the
amount of between-community noise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import LayerMatrix, MultiplexNetwork, MultiplexNMFError, validate_layer

SYNTH_N_NODES = 200
SYNTH_C_FIXED_WITHIN = 0.2
SYNTH_C_BETWEEN = 0.05
SYNTH_N_WITHIN = 0.3
SYNTH_N_FIXED_BETWEEN = 0.02

SYNTH_C_GRID = tuple(np.round(np.linspace(0.05, 0.3, 11), 10))
SYNTH_N_GRID = tuple(np.round(np.linspace(0.02, 0.2, 10), 10))


class InvalidSpec(MultiplexNMFError, ValueError):
    pass


@dataclass(frozen=True)
class PlantedSpec:
    """Block edge probabilities for one planted-partition layer.

    ``between_probs`` is a k x k symmetric matrix; its diagonal is ignored in
    favour of ``within_probs``. A scalar broadcasts to every block pair.
    """

    community_sizes: tuple
    within_probs: tuple
    between_probs: object
    seed: int = 0

    @property
    def n(self) -> int:
        return int(sum(self.community_sizes))

    def probability_matrix(self) -> np.ndarray:
        sizes = tuple(int(s) for s in self.community_sizes)
        k = len(sizes)
        if k == 0 or any(s <= 0 for s in sizes):
            raise InvalidSpec(f"community sizes must be positive, got {sizes}")
        within = np.asarray(self.within_probs, dtype=float).reshape(-1)
        if within.size != k:
            raise InvalidSpec(f"{within.size} within-probabilities for {k} communities")
        between = np.asarray(self.between_probs, dtype=float)
        if between.ndim == 0:
            between = np.full((k, k), float(between))
        if between.shape != (k, k):
            raise InvalidSpec(f"between_probs has shape {between.shape}, expected ({k}, {k})")
        if not np.array_equal(between, between.T):
            raise InvalidSpec("between_probs must be symmetric")
        P = between.copy()
        np.fill_diagonal(P, within)
        if np.any(~np.isfinite(P)) or np.any(P < 0) or np.any(P > 1):
            raise InvalidSpec("probabilities must lie in [0, 1]")
        return P

    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.community_sizes)), self.community_sizes)


def generate_layer(spec: PlantedSpec) -> LayerMatrix:
    """Sample a binary symmetric adjacency matrix with zero diagonal.

    One uniform draw per unordered pair, in row-major order over the strict
    upper triangle.
    """
    P = spec.probability_matrix()
    labels = spec.labels()
    n = labels.size
    iu, ju = np.triu_indices(n, k=1)
    rng = np.random.default_rng(spec.seed)
    draws = rng.random(iu.size)
    edges = draws < P[labels[iu], labels[ju]]
    A = np.zeros((n, n))
    A[iu[edges], ju[edges]] = 1.0
    A += A.T
    return validate_layer(A)


def layer_seed(seed: int, layer: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(layer)]).generate_state(1, np.uint64)[0])


def planted_multiplex(specs: Sequence[PlantedSpec]) -> MultiplexNetwork:
    labels = specs[0].labels()
    for s in specs[1:]:
        if tuple(s.community_sizes) != tuple(specs[0].community_sizes):
            raise InvalidSpec("all layers must share one partition")
    return MultiplexNetwork(
        layers=tuple(generate_layer(s) for s in specs),
        node_names=tuple(str(i) for i in range(labels.size)),
        ground_truth=labels,
    )


def _check_prob(name: str, p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise InvalidSpec(f"{name} must lie in [0, 1], got {p}")
    return p


def _two_blocks():
    half = SYNTH_N_NODES // 2
    return (half, SYNTH_N_NODES - half)


def synth_c_specs(p_var: float, seed: int) -> list[PlantedSpec]:
    p = _check_prob("p_var", p_var)
    sizes = _two_blocks()
    return [
        PlantedSpec(sizes, (p, SYNTH_C_FIXED_WITHIN), SYNTH_C_BETWEEN, layer_seed(seed, 0)),
        PlantedSpec(sizes, (SYNTH_C_FIXED_WITHIN, p), SYNTH_C_BETWEEN, layer_seed(seed, 1)),
    ]


def synth_n_specs(p_noise: float, seed: int) -> list[PlantedSpec]:
    p = _check_prob("p_noise", p_noise)
    sizes = _two_blocks()
    within = (SYNTH_N_WITHIN, SYNTH_N_WITHIN)
    return [
        PlantedSpec(sizes, within, p, layer_seed(seed, 0)),
        PlantedSpec(sizes, within, SYNTH_N_FIXED_BETWEEN, layer_seed(seed, 1)),
    ]


def generate_synth_c(p_var: float, seed: int) -> MultiplexNetwork:
    return planted_multiplex(synth_c_specs(p_var, seed))


def generate_synth_n(p_noise: float, seed: int) -> MultiplexNetwork:
    return planted_multiplex(synth_n_specs(p_noise, seed))
