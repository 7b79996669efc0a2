"""Single-layer symmetric factorizations (Step 1 of NF-CCE).

Four multiplicative update rules, each written for the orthonormality-
constrained problem (H^T H = I):

    SNMF    A ~ H H^T
    PNMF    A ~ H H^T A
    SNMTF   A ~ H S H^T,  S >= 0
    SsNMTF  A ~ H S H^T,  S of either sign (closed-form least-squares S)

The H rules drive H towards orthonormal columns. For SNMF and PNMF that
fixed point is not the unconstrained minimiser of the reconstruction error,
so their objective traces are not monotone in general; the scale of H
oscillates with period two around the orthonormal shell while the spanned
subspace converges.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .core import (
    MultiplexNMFError,
    ShapeMismatch,
    SolverConfig,
    as_array,
    draw_factor,
    pos_neg_split,
)

RIDGE = 1e-10
# off-diagonal scale of the initial centroid; the full H0^T A H0 is nearly
# uniform (random H0 columns are close to parallel) and steers the
# tri-factorizations into an off-diagonal, non-assortative local minimum
CENTROID_OFFDIAG_SHRINK = 0.1


class MissingCentroid(MultiplexNMFError, ValueError):
    pass


class SignModeMismatch(MultiplexNMFError, ValueError):
    pass


class SingularGram(MultiplexNMFError, np.linalg.LinAlgError):
    pass


class NumericalFailure(MultiplexNMFError, FloatingPointError):
    """A non-finite value appeared in a factor or objective."""


class FactorizeMethod(str, enum.Enum):
    SNMF = "snmf"
    PNMF = "pnmf"
    SNMTF = "snmtf"
    SSNMTF = "ssnmtf"

    @property
    def uses_centroid(self) -> bool:
        return self in (FactorizeMethod.SNMTF, FactorizeMethod.SSNMTF)

    @property
    def sign_mode(self) -> Optional[str]:
        if self is FactorizeMethod.SNMTF:
            return "nonnegative"
        if self is FactorizeMethod.SSNMTF:
            return "mixed"
        return None

    @classmethod
    def parse(cls, value) -> "FactorizeMethod":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown factorization {value!r}; expected one of "
                f"{[m.value for m in cls]}"
            ) from None


@dataclass
class FactorizeResult:
    H: np.ndarray
    S: Optional[np.ndarray]
    objective_trace: list = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False
    initial_objective: float = float("nan")


def _check_factor(A: np.ndarray, H: np.ndarray) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeMismatch(f"A must be square, got {A.shape}")
    if H.ndim != 2 or H.shape[0] != A.shape[0]:
        raise ShapeMismatch(f"H has shape {H.shape}, A has shape {A.shape}")


def _check_centroid(H: np.ndarray, S) -> np.ndarray:
    if S is None:
        raise MissingCentroid("tri-factorization needs a centroid matrix S")
    S = np.asarray(S, dtype=float)
    k = H.shape[1]
    if S.shape != (k, k):
        raise ShapeMismatch(f"S has shape {S.shape}, expected ({k}, {k})")
    return S


def objective_single(A, H, S=None, method=FactorizeMethod.SNMF) -> float:
    """Squared Frobenius reconstruction error of one layer."""
    method = FactorizeMethod.parse(method)
    A = as_array(A)
    H = np.asarray(H, dtype=float)
    _check_factor(A, H)
    if method is FactorizeMethod.SNMF:
        R = A - H @ H.T
    elif method is FactorizeMethod.PNMF:
        R = A - H @ (H.T @ A)
    else:
        S = _check_centroid(H, S)
        R = A - H @ S @ H.T
    return float(np.sum(R * R))


def _ratio_update(H: np.ndarray, P: np.ndarray, eps: float) -> np.ndarray:
    # H <- H * P / (H H^T P + eps)
    return H * P / (H @ (H.T @ P) + eps)


def update_snmf(H, A, eps: float = 1e-12) -> np.ndarray:
    A = as_array(A)
    H = np.asarray(H, dtype=float)
    _check_factor(A, H)
    return _ratio_update(H, A @ H, eps)


def gram_update(H, B, eps: float = 1e-12) -> np.ndarray:
    """PNMF rule with a precomputed Gram matrix ``B`` in place of A A^T."""
    B = np.asarray(B, dtype=float)
    H = np.asarray(H, dtype=float)
    _check_factor(B, H)
    return _ratio_update(H, B @ H, eps)


def update_pnmf(H, A, eps: float = 1e-12) -> np.ndarray:
    A = as_array(A)
    return gram_update(H, A @ A.T, eps)


def update_snmtf(H, S, A, eps: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    A = as_array(A)
    H = np.asarray(H, dtype=float)
    _check_factor(A, H)
    S = _check_centroid(H, S)
    if np.any(S < 0):
        raise SignModeMismatch("SNMTF needs a non-negative centroid matrix")
    H_new = _ratio_update(H, A @ H @ S, eps)
    G = H_new.T @ H_new
    S_new = S * (H_new.T @ A @ H_new) / (G @ S @ G + eps)
    return H_new, S_new


def centroid_closed_form(H, A, ridge: float = RIDGE) -> np.ndarray:
    """Least-squares centroid (H^T H)^-1 H^T A H (H^T H)^-1.

    Solved through a Cholesky factorization of the Gram matrix; a ridge
    ``ridge * I`` is added only when the Gram matrix is not positive definite.
    """
    A = as_array(A)
    H = np.asarray(H, dtype=float)
    G = H.T @ H
    M = H.T @ A @ H
    try:
        cho = scipy.linalg.cho_factor(G)
    except np.linalg.LinAlgError:
        try:
            cho = scipy.linalg.cho_factor(G + ridge * np.eye(G.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise SingularGram("H^T H is singular even with a ridge term") from exc
    X = scipy.linalg.cho_solve(cho, M)
    # G is symmetric, so X G^-1 = (G^-1 X^T)^T
    S = scipy.linalg.cho_solve(cho, X.T).T
    return (S + S.T) / 2


def update_ssnmtf(H, S, A, eps: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    A = as_array(A)
    H = np.asarray(H, dtype=float)
    _check_factor(A, H)
    S = _check_centroid(H, S)
    P_pos, P_neg = pos_neg_split(A @ H @ S)
    numer = P_pos + H @ (H.T @ P_neg)
    denom = P_neg + H @ (H.T @ P_pos) + eps
    H_new = H * numer / denom
    return H_new, centroid_closed_form(H_new, A)


def initial_centroid(H0, A) -> np.ndarray:
    """H0^T A H0 with its off-diagonal part shrunk by ``CENTROID_OFFDIAG_SHRINK``."""
    G = H0.T @ as_array(A) @ H0
    D = np.diag(np.diag(G))
    return D + CENTROID_OFFDIAG_SHRINK * (G - D)


def rescue_dead_columns(H: np.ndarray, rng: np.random.Generator, eps: float) -> np.ndarray:
    dead = np.flatnonzero(np.all(H < eps, axis=0))
    if dead.size == 0:
        return H
    H = H.copy()
    for j in dead:
        H[:, j] = draw_factor(rng, H.shape[0], 1)[:, 0]
    return H


def iterate(
    state: tuple,
    step: Callable[[tuple], tuple],
    objective: Callable[[tuple], float],
    cfg: SolverConfig,
    rng: np.random.Generator,
) -> tuple[tuple, list, float, bool]:
    """Apply ``step`` until the relative objective change drops below tolerance.

    ``state[0]`` must be the factor H; dead columns are re-seeded from ``rng``
    after each step. Returns (state, trace, initial_objective, converged).
    """
    prev = objective(state)
    initial = prev
    trace = []
    converged = False
    for _ in range(cfg.max_iters):
        state = step(state)
        H = rescue_dead_columns(state[0], rng, cfg.epsilon)
        state = (H,) + tuple(state[1:])
        obj = objective(state)
        if not np.isfinite(obj) or not np.all(np.isfinite(H)):
            raise NumericalFailure(f"non-finite value after {len(trace) + 1} iterations")
        trace.append(obj)
        if abs(obj - prev) / max(prev, cfg.epsilon) < cfg.rel_tol:
            converged = True
            break
        prev = obj
    return state, trace, initial, converged


def _start(H0, n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    if H0 is None:
        return draw_factor(rng, n, k)
    H0 = np.array(H0, dtype=float)
    if H0.shape != (n, k):
        raise ShapeMismatch(f"initial factor has shape {H0.shape}, expected ({n}, {k})")
    if np.any(H0 < 0) or not np.all(np.isfinite(H0)):
        raise ValueError("initial factor must be finite and non-negative")
    return H0


def factorize(A, method, cfg: SolverConfig, H0=None) -> FactorizeResult:
    """Factorize one layer from ``H0`` or, by default, a seeded random start.

    The generator seeded with ``cfg.seed`` is drawn from for the start (when
    ``H0`` is None) and for re-seeding dead columns.
    """
    method = FactorizeMethod.parse(method)
    A = as_array(A)
    n = A.shape[0]
    if cfg.k > n:
        raise ShapeMismatch(f"k={cfg.k} exceeds node count {n}")
    rng = np.random.default_rng(cfg.seed)
    H0 = _start(H0, n, cfg.k, rng)
    eps = cfg.epsilon

    if method is FactorizeMethod.SNMF:
        state = (H0,)
        step = lambda s: (update_snmf(s[0], A, eps),)
    elif method is FactorizeMethod.PNMF:
        B = A @ A.T
        state = (H0,)
        step = lambda s: (gram_update(s[0], B, eps),)
    elif method is FactorizeMethod.SNMTF:
        state = (H0, initial_centroid(H0, A))
        step = lambda s: update_snmtf(s[0], s[1], A, eps)
    else:
        state = (H0, initial_centroid(H0, A))
        step = lambda s: update_ssnmtf(s[0], s[1], A, eps)

    def objective(s):
        return objective_single(A, s[0], s[1] if len(s) > 1 else None, method)

    state, trace, initial, converged = iterate(state, step, objective, cfg, rng)
    return FactorizeResult(
        H=state[0],
        S=state[1] if method.uses_centroid else None,
        objective_trace=trace,
        iterations_run=len(trace),
        converged=converged,
        initial_objective=initial,
    )
