"""Acceptance gate: one test per criterion, each at its stated tolerance and
runtime budget. Every test records a one-line PASS/FAIL verdict that is
printed in the terminal summary.
"""
import time
from pathlib import Path

import numpy as np
import pytest

from multiplex_nmf.cli import main, sweep_rows
from multiplex_nmf.core import SolverConfig, natural_gradient, random_orthonormal
from multiplex_nmf.evaluation import (
    AnnotationSet,
    adjusted_rand_index,
    nmi,
    purity,
    rand_index,
    redundancy,
)
from multiplex_nmf.factorize import factorize
from multiplex_nmf.fuse import projection_distance_sq
from multiplex_nmf.synth import SYNTH_C_GRID, SYNTH_N_GRID

import oracles
from conftest import random_symmetric, record_criterion

SEEDS = range(5)
EXPERIMENT = dict(k=2, alpha=0.5, max_iters=500, rel_tol=1e-6, update_centroids=True)
COLLECTIVE = ("csnmf", "cpnmf", "csnmtf", "cssnmtf")
MERGED = {"csnmf": "merged-snmf", "cpnmf": "merged-pnmf",
          "csnmtf": "merged-snmtf", "cssnmtf": "merged-ssnmtf"}


def mean_nmi(family, grid, methods):
    """{(param, method): mean NMI over SEEDS} via the sweep machinery."""
    rows = sweep_rows(family, grid, methods, list(SEEDS), EXPERIMENT)
    out: dict = {}
    for param, method, _seed, _pur, score, _ari in rows:
        out.setdefault((param, method), []).append(score)
    return {key: float(np.mean(v)) for key, v in out.items()}


def verdict(number, ok, elapsed, budget, detail):
    passed = bool(ok) and elapsed < budget
    record_criterion(number, passed, f"{detail}; {elapsed:.1f}s (budget {budget:g}s)")
    assert ok, detail
    assert elapsed < budget, f"took {elapsed:.1f}s, budget {budget}s"


def test_criterion_01_monotone_descent():
    start = time.perf_counter()
    slack = {"snmf": 1e-9, "pnmf": 1e-9, "snmtf": 1e-9, "ssnmtf": 1e-6}
    worst = {}
    for method in slack:
        worst[method] = -np.inf
        for seed in range(20):
            A = random_symmetric(np.random.default_rng(1000 + seed), 60)
            res = factorize(A, method, SolverConfig(k=4, seed=seed))
            tr = np.array([res.initial_objective] + res.objective_trace)
            worst[method] = max(worst[method], float(np.max(np.diff(tr) / tr[:-1])))
    elapsed = time.perf_counter() - start
    bad = [m for m in slack if worst[m] > slack[m]]
    detail = "worst relative rise " + ", ".join(
        f"{m} {worst[m]:.2g} (slack {slack[m]:g})" for m in slack)
    if bad:
        detail += f"; exceeded by {', '.join(bad)}"
    verdict(1, not bad, elapsed, 30, detail)


def test_criterion_02_natural_gradient_tangency():
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        H = random_orthonormal(40, 5, rng)
        G = rng.standard_normal((40, 5))
        ratio = np.max(np.abs(H.T @ natural_gradient(G, H))) / np.max(np.abs(G))
        worst = max(worst, float(ratio))
    elapsed = time.perf_counter() - start
    verdict(2, worst <= 1e-10, elapsed, 5, f"max |H^T g| / max |G| = {worst:.2g} (<= 1e-10)")


def test_criterion_03_grassmann_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        H1 = random_orthonormal(30, 4, rng)
        H2 = random_orthonormal(30, 4, rng)
        worst = max(worst, abs(projection_distance_sq(H1, H2)
                               - oracles.principal_angle_distance(H1, H2)))
    elapsed = time.perf_counter() - start
    verdict(3, worst <= 1e-10, elapsed, 5, f"max deviation from sum sin^2 = {worst:.2g} (<= 1e-10)")


def _table_oracle(P, Qs, k):
    """Purity and NMI of partition P against every row of Qs from count tables."""
    onehot_p = np.eye(k)[list(P)]
    onehot_q = np.eye(k)[Qs]
    tables = np.einsum("ia,qib->qab", onehot_p, onehot_q)
    n = len(P)
    pur = tables.max(axis=2).sum(axis=1) / n
    joint = tables / n
    pa, pb = joint.sum(axis=2), joint.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = joint / (pa[:, :, None] * pb[:, None, :])
        mi = np.where(joint > 0, joint * np.log2(np.where(joint > 0, ratio, 1)), 0).sum(axis=(1, 2))
        ha = -np.where(pa > 0, pa * np.log2(np.where(pa > 0, pa, 1)), 0).sum(axis=1)
        hb = -np.where(pb > 0, pb * np.log2(np.where(pb > 0, pb, 1)), 0).sum(axis=1)
    denom = (ha + hb) / 2
    nmi_ = np.where(denom > 0, mi / np.where(denom > 0, denom, 1), 1.0)
    return pur, nmi_


def _pair_oracle(P, comember_q):
    """Rand and adjusted Rand indices by enumerating node pairs (bit vectors)."""
    cp = oracles.comembership(P)
    n11 = (cp & comember_q).sum(axis=1).astype(float)
    n10 = (cp & ~comember_q).sum(axis=1).astype(float)
    n01 = (~cp & comember_q).sum(axis=1).astype(float)
    n00 = (~cp & ~comember_q).sum(axis=1).astype(float)
    ri = (n11 + n00) / (n11 + n10 + n01 + n00)
    den = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11)
    same = (n10 == 0) & (n01 == 0)
    ari = np.where(den > 0, 2 * (n00 * n11 - n01 * n10) / np.where(den > 0, den, 1),
                   np.where(same, 1.0, 0.0))
    return ri, ari


@pytest.mark.slow
def test_criterion_04_metric_oracles():
    start = time.perf_counter()
    parts = oracles.set_partitions(8, 3)
    Qs = np.array(parts)
    comember = np.array([oracles.comembership(q) for q in parts])
    worst = {"purity": 0.0, "nmi": 0.0, "rand_index": 0.0, "ari": 0.0}
    for P in parts:
        pur, nmi_ = _table_oracle(P, Qs, 3)
        ri, ari = _pair_oracle(P, comember)
        got = np.array([[purity(P, Q), nmi(P, Q), rand_index(P, Q), adjusted_rand_index(P, Q)]
                        for Q in parts])
        for col, (name, ref) in enumerate(zip(worst, (pur, nmi_, ri, ari))):
            worst[name] = max(worst[name], float(np.max(np.abs(got[:, col] - ref))))
    rng = np.random.default_rng(4)
    for _ in range(100):
        a = rng.integers(0, 4, 12).tolist()
        b = rng.integers(0, 4, 12).tolist()
        checks = {"purity": (purity(a, b), oracles.purity(a, b)),
                  "nmi": (nmi(a, b), oracles.nmi(a, b)),
                  "rand_index": (rand_index(a, b), oracles.rand_index(a, b)),
                  "ari": (adjusted_rand_index(a, b), oracles.adjusted_rand_index(a, b))}
        for name, (x, y) in checks.items():
            worst[name] = max(worst[name], abs(x - y))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-12
    detail = (f"{len(parts)}^2 ordered partition pairs + 100 random labelings, max error "
              + ", ".join(f"{k} {v:.1g}" for k, v in worst.items()) + " (<= 1e-12)")
    verdict(4, ok, elapsed, 20, detail)


def test_criterion_05_planted_recovery():
    start = time.perf_counter()
    scores = mean_nmi("synth-n", [0.02], COLLECTIVE)
    elapsed = time.perf_counter() - start
    ok = all(scores[(0.02, m)] >= 0.95 for m in COLLECTIVE)
    detail = "mean NMI " + ", ".join(f"{m} {scores[(0.02, m)]:.3f}" for m in COLLECTIVE) + " (>= 0.95)"
    verdict(5, ok, elapsed, 60, detail)


@pytest.mark.slow
def test_criterion_06_noise_trend():
    start = time.perf_counter()
    scores = mean_nmi("synth-n", SYNTH_N_GRID, ["csnmf"])
    elapsed = time.perf_counter() - start
    curve = [scores[(p, "csnmf")] for p in SYNTH_N_GRID]
    inversions = sum(b > a for a, b in zip(curve, curve[1:]))
    ok = inversions <= 1 and curve[-1] < curve[0]
    detail = (f"CSNMF mean NMI {' '.join(f'{x:.3f}' for x in curve)}; "
              f"{inversions} inversions (<= 1), NMI(0.2) < NMI(0.02) is {curve[-1] < curve[0]}")
    verdict(6, ok, elapsed, 300, detail)


@pytest.mark.slow
def test_criterion_07_complementarity():
    start = time.perf_counter()
    cp = mean_nmi("synth-c", SYNTH_C_GRID, ["cpnmf"])
    merged = mean_nmi("synth-c", [0.05], ["merged-snmf"])
    elapsed = time.perf_counter() - start
    curve = [cp[(p, "cpnmf")] for p in SYNTH_C_GRID]
    beats = cp[(0.05, "cpnmf")] > merged[(0.05, "merged-snmf")]
    ok = beats and min(curve) >= 0.8
    detail = (f"at p_var=0.05 CPNMF {cp[(0.05, 'cpnmf')]:.3f} vs merged SNMF "
              f"{merged[(0.05, 'merged-snmf')]:.3f}; CPNMF min over grid {min(curve):.3f} (>= 0.8)")
    verdict(7, ok, elapsed, 300, detail)


@pytest.mark.slow
def test_criterion_08_baseline_inferiority():
    start = time.perf_counter()
    grid = [float(p) for p in SYNTH_C_GRID if p <= 0.1]
    scores = mean_nmi("synth-c", grid, list(COLLECTIVE) + list(MERGED.values()))
    elapsed = time.perf_counter() - start
    losses = [(p, m, scores[(p, m)], scores[(p, MERGED[m])])
              for p in grid for m in COLLECTIVE if scores[(p, m)] < scores[(p, MERGED[m])]]
    detail = f"{len(grid) * len(COLLECTIVE)} comparisons at p_var {grid}"
    if losses:
        detail += "; losses " + ", ".join(f"{m}@{p}: {a:.3f} < {b:.3f}" for p, m, a, b in losses)
    verdict(8, not losses, elapsed, 300, detail)


def _snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).iterdir())}


def test_criterion_09_determinism(tmp_path):
    start = time.perf_counter()
    data = tmp_path / "data"
    assert main(["generate", "synth-c", "--p-var", "0.1", "--seed", "1", "--out", str(data)]) == 0
    checks = {}
    for method in COLLECTIVE:
        first = tmp_path / f"cluster-{method}"
        assert main(["cluster", str(data / "layer_0.tsv"), str(data / "layer_1.tsv"),
                     "--nodes", str(data / "nodes.tsv"), "--method", method,
                     "--out", str(first)]) == 0
        again = tmp_path / f"replay-{method}"
        assert main(["replay", str(first / "manifest.json"), "--out", str(again)]) == 0
        checks[f"cluster {method}"] = _snapshot(first) == _snapshot(again)
    first = tmp_path / "sweep"
    assert main(["sweep", "synth-n", "--grid", "0.02,0.1", "--methods", "csnmf,merged-snmf",
                 "--seeds", "2", "--out", str(first)]) == 0
    again = tmp_path / "sweep-replay"
    assert main(["replay", str(first / "manifest.json"), "--out", str(again)]) == 0
    checks["sweep"] = _snapshot(first) == _snapshot(again)
    elapsed = time.perf_counter() - start
    failed = [k for k, v in checks.items() if not v]
    detail = f"{len(checks)} replays byte-identical" if not failed else f"differs: {failed}"
    verdict(9, not failed, elapsed, 30, detail)


def test_criterion_10_redundancy():
    start = time.perf_counter()
    hand = redundancy([0, 1, 2], AnnotationSet(({0, 1}, {0}, {2}), 4))
    homogeneous = redundancy([0, 1], AnnotationSet(({3}, {3}), 4))
    uniform = redundancy([0, 1, 2, 3], AnnotationSet(({0}, {1}, {2}, {3}), 4))
    elapsed = time.perf_counter() - start
    ok = hand == 0.25 and homogeneous == 1.0 and uniform == 0.0
    verdict(10, ok, elapsed, 1, f"R = {hand!r} (0.25), {homogeneous!r} (1), {uniform!r} (0)")
