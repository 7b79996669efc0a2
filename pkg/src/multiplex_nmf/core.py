"""Shared matrix types, validation and numerical primitives."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DEFAULT_EPSILON = 1e-12
EPSILON_ENV_VAR = "MULTIPLEX_NMF_EPSILON"
ASYMMETRY_TOL = 1e-9


class MultiplexNMFError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatch(MultiplexNMFError, ValueError):
    pass


class NonSquare(ShapeMismatch):
    pass


class AsymmetricBeyondTolerance(MultiplexNMFError, ValueError):
    pass


class NegativeEntry(MultiplexNMFError, ValueError):
    pass


class InvalidShape(MultiplexNMFError, ValueError):
    pass


class InvalidConfig(MultiplexNMFError, ValueError):
    pass


def default_epsilon() -> float:
    """Denominator floor, overridable through ``MULTIPLEX_NMF_EPSILON``."""
    raw = os.environ.get(EPSILON_ENV_VAR)
    if raw is None or raw.strip() == "":
        return DEFAULT_EPSILON
    try:
        value = float(raw)
    except ValueError as exc:
        raise InvalidConfig(f"{EPSILON_ENV_VAR}={raw!r} is not a number") from exc
    if not value > 0:
        raise InvalidConfig(f"{EPSILON_ENV_VAR} must be > 0, got {value}")
    return value


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LayerMatrix:
    """Symmetric non-negative adjacency matrix of one network layer.

    Build instances through :func:`validate_layer`; the constructor does not
    re-check the invariants.
    """

    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LayerMatrix):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(
            np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class MultiplexNetwork:
    """Ordered layers over one node set, with optional names and labels."""

    layers: tuple
    node_names: Optional[tuple] = None
    ground_truth: Optional[np.ndarray] = None

    def __post_init__(self):
        layers = tuple(
            layer if isinstance(layer, LayerMatrix) else validate_layer(layer)
            for layer in self.layers
        )
        if not layers:
            raise InvalidShape("a multiplex network needs at least one layer")
        n = layers[0].n
        if any(layer.n != n for layer in layers):
            raise ShapeMismatch(
                f"layer sizes differ: {[layer.n for layer in layers]}"
            )
        object.__setattr__(self, "layers", layers)
        if self.node_names is not None:
            names = tuple(str(x) for x in self.node_names)
            if len(names) != n:
                raise ShapeMismatch(f"{len(names)} node names for {n} nodes")
            object.__setattr__(self, "node_names", names)
        if self.ground_truth is not None:
            truth = np.asarray(self.ground_truth, dtype=np.int64)
            if truth.shape != (n,):
                raise ShapeMismatch(f"ground truth has shape {truth.shape}, expected ({n},)")
            truth.setflags(write=False)
            object.__setattr__(self, "ground_truth", truth)

    @property
    def n(self) -> int:
        return self.layers[0].n

    def __len__(self) -> int:
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)


@dataclass(frozen=True)
class SolverConfig:
    """Parameters shared by the single-layer and collective solvers.

    ``update_centroids`` only affects the tri-factorization fusion path: each
    layer's centroid matrix is re-estimated against the consensus factor on
    every iteration. Set it to False to hold the centroids at their Step-1
    values; those inherit any failure of the per-layer factorization.
    """

    k: int
    alpha: float = 0.01
    max_iters: int = 500
    rel_tol: float = 1e-6
    seed: int = 0
    epsilon: float = field(default_factory=default_epsilon)
    update_centroids: bool = True

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InvalidConfig(f"k must be a positive integer, got {self.k}")
        if not self.alpha >= 0:
            raise InvalidConfig(f"alpha must be >= 0, got {self.alpha}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidConfig(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.rel_tol > 0:
            raise InvalidConfig(f"rel_tol must be > 0, got {self.rel_tol}")
        if not self.epsilon > 0:
            raise InvalidConfig(f"epsilon must be > 0, got {self.epsilon}")


def as_array(A) -> np.ndarray:
    if isinstance(A, LayerMatrix):
        return A.values
    return np.asarray(A, dtype=float)


def validate_layer(values, tol: float = ASYMMETRY_TOL) -> LayerMatrix:
    """Check an adjacency matrix and wrap it as a :class:`LayerMatrix`.

    Asymmetry up to ``tol`` (max absolute difference) is absorbed by averaging
    with the transpose; anything larger is rejected, as are negative weights.
    """
    M = np.array(values, dtype=float, copy=True)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NonSquare(f"adjacency matrix must be square, got shape {M.shape}")
    if M.shape[0] < 1:
        raise InvalidShape("adjacency matrix must have at least one node")
    if not np.all(np.isfinite(M)):
        raise NegativeEntry("adjacency matrix contains non-finite entries")
    if np.any(M < 0):
        i, j = np.argwhere(M < 0)[0]
        raise NegativeEntry(f"negative weight {M[i, j]} at ({i}, {j})")
    asym = float(np.max(np.abs(M - M.T)))
    if asym > tol:
        raise AsymmetricBeyondTolerance(
            f"max |M - M^T| = {asym:.3g} exceeds tolerance {tol:g}"
        )
    if asym > 0:
        M = (M + M.T) / 2
    return LayerMatrix(_frozen(M))


def pos_neg_split(M) -> tuple[np.ndarray, np.ndarray]:
    """Split ``M`` into non-negative parts with ``M == pos - neg``."""
    M = np.asarray(M, dtype=float)
    # max/min rather than (|M| +- M)/2: exact reconstruction, no rounding
    return np.maximum(M, 0.0), -np.minimum(M, 0.0)


def natural_gradient(ordinary_grad, H) -> np.ndarray:
    """Project a gradient onto the tangent space at ``H``: G - H (H^T G)."""
    G = np.asarray(ordinary_grad, dtype=float)
    H = np.asarray(H, dtype=float)
    if G.shape != H.shape:
        raise ShapeMismatch(f"gradient shape {G.shape} != factor shape {H.shape}")
    return G - H @ (H.T @ G)


def draw_factor(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    # 1 - U[0,1) is U(0,1], so every entry is strictly positive
    H = 1.0 - rng.random((n, k))
    return H / np.linalg.norm(H, axis=0)


def init_factor(n: int, k: int, seed: int) -> np.ndarray:
    """Strictly positive random n x k factor with unit-norm columns."""
    if int(n) != n or int(k) != k or not 1 <= k <= n:
        raise InvalidShape(f"need 1 <= k <= n, got n={n}, k={k}")
    return draw_factor(np.random.default_rng(seed), int(n), int(k))


def orthonormality_residual(H) -> float:
    """Frobenius norm of H^T H - I."""
    H = np.asarray(H, dtype=float)
    return float(np.linalg.norm(H.T @ H - np.eye(H.shape[1])))


def random_orthonormal(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random n x k matrix with orthonormal columns (via QR)."""
    Q, R = np.linalg.qr(rng.standard_normal((n, k)))
    return Q * np.sign(np.diag(R))


def stack_layers(layers: Sequence) -> list[np.ndarray]:
    return [as_array(A) for A in layers]
