"""Consensus factor across layers (Step 2 of NF-CCE) and hard clustering."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import (
    MultiplexNetwork,
    MultiplexNMFError,
    ShapeMismatch,
    SolverConfig,
    as_array,
    orthonormality_residual,
    pos_neg_split,
    validate_layer,
)
from .factorize import (
    FactorizeMethod,
    MissingCentroid,
    SignModeMismatch,
    _ratio_update,
    _start,
    centroid_closed_form,
    factorize,
    iterate,
    objective_single,
)


class NaNInput(MultiplexNMFError, ValueError):
    pass


@dataclass(frozen=True)
class ClusterAssignment:
    """Hard labels in ``[0, k)``; ``zero_rows`` lists nodes whose factor row
    was entirely zero (they get label 0)."""

    labels: np.ndarray
    k: int
    zero_rows: tuple = ()

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ShapeMismatch("labels must be one-dimensional")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k})")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.size


@dataclass
class FusionResult:
    H: np.ndarray
    per_layer_H: list
    per_layer_S: Optional[list]
    assignment: ClusterAssignment
    collective_objective_trace: list = field(default_factory=list)
    orthonormality_residual: float = float("nan")
    converged: bool = False
    iterations_run: int = 0
    per_layer_objective: list = field(default_factory=list)
    method: str = ""


def projection_distance_sq(H1, H2) -> float:
    """Squared projection distance k - tr(H1 H1^T H2 H2^T) between subspaces.

    Equals the sum of sin^2 of the principal angles when both arguments have
    orthonormal columns. Computed as k - ||H1^T H2||_F^2 to avoid n x n
    products.
    """
    H1 = np.asarray(H1, dtype=float)
    H2 = np.asarray(H2, dtype=float)
    if H1.shape != H2.shape:
        raise ShapeMismatch(f"factor shapes differ: {H1.shape} vs {H2.shape}")
    C = H1.T @ H2
    return float(H1.shape[1] - np.sum(C * C))


def _layers(network) -> list[np.ndarray]:
    if isinstance(network, MultiplexNetwork):
        return [A.values for A in network.layers]
    return [as_array(A) for A in network]


def collective_objective(layers, per_layer_H, H, S_list=None, alpha=0.0,
                         method=FactorizeMethod.SNMF) -> float:
    """Sum of per-layer reconstruction errors of the consensus factor plus
    ``alpha`` times the summed projection distances to each layer factor."""
    method = FactorizeMethod.parse(method)
    As = _layers(layers)
    if len(per_layer_H) != len(As):
        raise ShapeMismatch(f"{len(per_layer_H)} layer factors for {len(As)} layers")
    if method.uses_centroid:
        if S_list is None:
            raise MissingCentroid("tri-factorization objective needs centroids")
        if len(S_list) != len(As):
            raise ShapeMismatch(f"{len(S_list)} centroids for {len(As)} layers")
    else:
        S_list = [None] * len(As)
    recon = sum(objective_single(A, H, S, method) for A, S in zip(As, S_list))
    consensus = sum(projection_distance_sq(H, Hi) for Hi in per_layer_H)
    return float(recon + alpha * consensus)


def hard_clustering(H) -> ClusterAssignment:
    """Row-normalize ``H`` and take the arg-max column of each row.

    Ties go to the lowest column index (``np.argmax`` semantics).
    """
    H = np.asarray(H, dtype=float)
    if np.isnan(H).any():
        raise NaNInput("factor matrix contains NaN")
    sums = np.abs(H).sum(axis=1, keepdims=True)
    zero = sums[:, 0] == 0
    P = np.divide(H, sums, out=np.zeros_like(H), where=~zero[:, None])
    labels = np.argmax(P, axis=1)
    labels[zero] = 0
    return ClusterAssignment(labels, H.shape[1], tuple(int(i) for i in np.flatnonzero(zero)))


def _step1(As, method, cfg):
    results = []
    for i, A in enumerate(As):
        layer_cfg = SolverConfig(
            k=cfg.k, alpha=cfg.alpha, max_iters=cfg.max_iters, rel_tol=cfg.rel_tol,
            seed=cfg.seed + i, epsilon=cfg.epsilon, update_centroids=cfg.update_centroids,
        )
        results.append(factorize(A, method, layer_cfg))
    return results


def _finish(method, As, per_layer_H, per_layer_S, H, trace, converged, cfg):
    S_list = per_layer_S if per_layer_S is not None else [None] * len(As)
    return FusionResult(
        H=H,
        per_layer_H=list(per_layer_H),
        per_layer_S=None if per_layer_S is None else list(per_layer_S),
        assignment=hard_clustering(H),
        collective_objective_trace=list(trace),
        orthonormality_residual=orthonormality_residual(H),
        converged=converged,
        iterations_run=len(trace),
        per_layer_objective=[objective_single(A, H, S, method) for A, S in zip(As, S_list)],
        method=f"c{method.value}",
    )


def _check_step1(As, per_layer_H, k):
    if len(per_layer_H) != len(As):
        raise ShapeMismatch(f"{len(per_layer_H)} layer factors for {len(As)} layers")
    for Hi in per_layer_H:
        if np.shape(Hi) != (As[0].shape[0], k):
            raise ShapeMismatch(f"layer factor has shape {np.shape(Hi)}, expected k={k}")


def fusion_matrix_csnmf(layers, per_layer_H, alpha) -> np.ndarray:
    As = _layers(layers)
    M = sum(A + (alpha / 2) * (Hi @ Hi.T) for A, Hi in zip(As, per_layer_H))
    return validate_layer(M).values


def fusion_matrix_cpnmf(layers, per_layer_H, alpha) -> np.ndarray:
    As = _layers(layers)
    M = sum(A @ A.T + alpha * (Hi @ Hi.T) for A, Hi in zip(As, per_layer_H))
    # A A^T is symmetric only up to rounding
    return (M + M.T) / 2


def _fuse_projective(layers, per_layer_H, cfg, method, B, H0=None) -> FusionResult:
    As = _layers(layers)
    rng = np.random.default_rng(cfg.seed)
    H0 = _start(H0, As[0].shape[0], cfg.k, rng)
    eps = cfg.epsilon

    def step(s):
        return (_ratio_update(s[0], B @ s[0], eps),)

    def objective(s):
        return collective_objective(As, per_layer_H, s[0], None, cfg.alpha, method)

    (H,), trace, _, converged = iterate((H0,), step, objective, cfg, rng)
    return _finish(method, As, per_layer_H, None, H, trace, converged, cfg)


def fuse_csnmf(layers, per_layer_H, cfg: SolverConfig, H0=None) -> FusionResult:
    """Consensus by SNMF updates on sum_i (A_i + alpha/2 H_i H_i^T)."""
    As = _layers(layers)
    _check_step1(As, per_layer_H, cfg.k)
    B = fusion_matrix_csnmf(As, per_layer_H, cfg.alpha)
    return _fuse_projective(As, per_layer_H, cfg, FactorizeMethod.SNMF, B, H0)


def fuse_cpnmf(layers, per_layer_H, cfg: SolverConfig, H0=None) -> FusionResult:
    """Consensus by the PNMF rule with Gram matrix sum_i (A_i A_i^T + alpha H_i H_i^T).

    The fused matrix stands in for A A^T directly; it is not squared again.
    """
    As = _layers(layers)
    _check_step1(As, per_layer_H, cfg.k)
    B = fusion_matrix_cpnmf(As, per_layer_H, cfg.alpha)
    return _fuse_projective(As, per_layer_H, cfg, FactorizeMethod.PNMF, B, H0)


def align_factors(per_layer_H, per_layer_S):
    """Permute each layer's columns (and centroid) to best match layer 0.

    Column order is arbitrary per layer; H P with P^T S P reconstructs the
    same matrix, so this changes nothing but the labelling.
    """
    ref = per_layer_H[0]
    out_H, out_S = [ref], [per_layer_S[0]]
    for Hi, Si in zip(per_layer_H[1:], per_layer_S[1:]):
        _, perm = linear_sum_assignment(-(ref.T @ Hi))
        out_H.append(Hi[:, perm])
        out_S.append(Si[np.ix_(perm, perm)])
    return out_H, out_S


def consensus_start(per_layer_H) -> np.ndarray:
    H = np.mean(per_layer_H, axis=0)
    norms = np.linalg.norm(H, axis=0)
    norms[norms == 0] = 1.0
    return H / norms


def _csnmtf_step(As, per_layer_H, S_list, alpha, eps, mixed):
    def step(s):
        H = s[0]
        pull = (alpha / 2) * sum(Hi @ (Hi.T @ H) for Hi in per_layer_H)
        Ps = [A @ H @ S for A, S in zip(As, S_list)]
        if not mixed:
            P = sum(Ps) + pull
            return (_ratio_update(H, P, eps),)
        pos = np.zeros_like(H)
        neg = np.zeros_like(H)
        for P in Ps:
            p, q = pos_neg_split(P)
            pos += p
            neg += q
        numer = pos + H @ (H.T @ neg) + pull
        denom = neg + H @ (H.T @ (pos + pull)) + eps
        return (H * numer / denom,)
    return step


def fuse_csnmtf(layers, per_layer_H, per_layer_S, cfg: SolverConfig,
                sign_mode: str = "nonnegative") -> FusionResult:
    """Consensus by the multiplex tri-factorization rule.

    Centroids stay at their Step-1 values unless ``cfg.update_centroids``;
    then each is refreshed after every H update with the single-layer centroid
    rule of its sign mode, evaluated at the consensus factor.
    """
    if sign_mode not in ("nonnegative", "mixed"):
        raise ValueError(f"unknown sign mode {sign_mode!r}")
    mixed = sign_mode == "mixed"
    method = FactorizeMethod.SSNMTF if mixed else FactorizeMethod.SNMTF
    As = _layers(layers)
    _check_step1(As, per_layer_H, cfg.k)
    if per_layer_S is None or any(S is None for S in per_layer_S):
        raise MissingCentroid("tri-factorization fusion needs every layer centroid")
    if len(per_layer_S) != len(As):
        raise ShapeMismatch(f"{len(per_layer_S)} centroids for {len(As)} layers")
    S_list = [np.asarray(S, dtype=float) for S in per_layer_S]
    if not mixed and any(np.any(S < 0) for S in S_list):
        raise SignModeMismatch("non-negative fusion got a centroid with negative entries")
    per_layer_H, S_list = align_factors([np.asarray(H, float) for H in per_layer_H], S_list)

    rng = np.random.default_rng(cfg.seed)
    eps = cfg.epsilon
    H0 = consensus_start(per_layer_H)

    if cfg.update_centroids:
        h_step = None

        def step(s):
            nonlocal h_step
            h_step = _csnmtf_step(As, per_layer_H, s[1], cfg.alpha, eps, mixed)
            (H,) = h_step(s)
            if mixed:
                S_new = [centroid_closed_form(H, A) for A in As]
            else:
                G = H.T @ H
                S_new = [S * (H.T @ A @ H) / (G @ S @ G + eps) for A, S in zip(As, s[1])]
            return (H, S_new)

        state = (H0, S_list)
    else:
        base = _csnmtf_step(As, per_layer_H, S_list, cfg.alpha, eps, mixed)
        step = lambda s: base(s) + (s[1],)
        state = (H0, S_list)

    def objective(s):
        return collective_objective(As, per_layer_H, s[0], s[1], cfg.alpha, method)

    (H, S_final), trace, _, converged = iterate(state, step, objective, cfg, rng)
    return _finish(method, As, per_layer_H, S_final, H, trace, converged, cfg)


def nf_cce(network, method, cfg: SolverConfig) -> FusionResult:
    """Factorize every layer, then fuse the layer factors into a consensus."""
    method = FactorizeMethod.parse(method)
    As = _layers(network)
    if cfg.k > As[0].shape[0]:
        raise ShapeMismatch(f"k={cfg.k} exceeds node count {As[0].shape[0]}")
    step1 = _step1(As, method, cfg)
    per_layer_H = [r.H for r in step1]
    if method is FactorizeMethod.SNMF:
        return fuse_csnmf(As, per_layer_H, cfg)
    if method is FactorizeMethod.PNMF:
        return fuse_cpnmf(As, per_layer_H, cfg)
    return fuse_csnmtf(As, per_layer_H, [r.S for r in step1], cfg, method.sign_mode)


def merge_layers(network) -> np.ndarray:
    As = _layers(network)
    return sum(As) / len(As)


def merged_baseline(network, method, cfg: SolverConfig) -> FusionResult:
    """Average all layers into one and factorize it as a single network.

    ``per_layer_H`` is empty: the baseline has no per-layer step.
    """
    method = FactorizeMethod.parse(method)
    As = _layers(network)
    A = merge_layers(As)
    res = factorize(A, method, cfg)
    S_list = [res.S] * len(As) if res.S is not None else [None] * len(As)
    return FusionResult(
        H=res.H,
        per_layer_H=[],
        per_layer_S=None if res.S is None else [res.S],
        assignment=hard_clustering(res.H),
        collective_objective_trace=list(res.objective_trace),
        orthonormality_residual=orthonormality_residual(res.H),
        converged=res.converged,
        iterations_run=res.iterations_run,
        per_layer_objective=[objective_single(Ai, res.H, S, method) for Ai, S in zip(As, S_list)],
        method=f"merged-{method.value}",
    )


METHODS = {
    "csnmf": FactorizeMethod.SNMF,
    "cpnmf": FactorizeMethod.PNMF,
    "csnmtf": FactorizeMethod.SNMTF,
    "cssnmtf": FactorizeMethod.SSNMTF,
}


def run_method(network, tag: str, cfg: SolverConfig) -> FusionResult:
    """Dispatch on a method tag.

    Tags: the collective ``csnmf``/``cpnmf``/``csnmtf``/``cssnmtf``, plain
    ``snmf``/``pnmf``/``snmtf``/``ssnmtf`` (first layer only; single-layer
    input expected), and ``merged-<base>`` for the averaged-layer baseline.
    """
    tag = tag.lower()
    if tag in METHODS:
        return nf_cce(network, METHODS[tag], cfg)
    if tag.startswith("merged-"):
        return merged_baseline(network, tag[len("merged-"):], cfg)
    method = FactorizeMethod.parse(tag)
    As = _layers(network)
    if len(As) != 1:
        raise ValueError(
            f"single-layer method {tag!r} needs exactly one layer, got {len(As)}; "
            f"use c{tag} or merged-{tag}"
        )
    res = factorize(As[0], method, cfg)
    return FusionResult(
        H=res.H,
        per_layer_H=[res.H],
        per_layer_S=None if res.S is None else [res.S],
        assignment=hard_clustering(res.H),
        collective_objective_trace=list(res.objective_trace),
        orthonormality_residual=orthonormality_residual(res.H),
        converged=res.converged,
        iterations_run=res.iterations_run,
        per_layer_objective=[res.objective_trace[-1]],
        method=method.value,
    )


METHOD_TAGS = (
    list(METHODS)
    + [m.value for m in FactorizeMethod]
    + [f"merged-{m.value}" for m in FactorizeMethod]
)
