import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiplex_nmf.core import ShapeMismatch, SolverConfig, draw_factor
from multiplex_nmf.evaluation import adjusted_rand_index
from multiplex_nmf.factorize import (
    FactorizeMethod,
    MissingCentroid,
    NumericalFailure,
    SignModeMismatch,
    centroid_closed_form,
    factorize,
    initial_centroid,
    iterate,
    objective_single,
    rescue_dead_columns,
    update_pnmf,
    update_snmf,
    update_snmtf,
    update_ssnmtf,
)
from multiplex_nmf.fuse import hard_clustering

from conftest import random_symmetric, same_partition, two_block


def block_factor(sizes):
    """Orthonormal non-negative indicator factor for consecutive blocks."""
    n, k = sum(sizes), len(sizes)
    H = np.zeros((n, k))
    start = 0
    for j, s in enumerate(sizes):
        H[start:start + s, j] = 1 / np.sqrt(s)
        start += s
    return H


def test_method_parse():
    assert FactorizeMethod.parse("SsNMTF") is FactorizeMethod.SSNMTF
    assert FactorizeMethod.SNMTF.sign_mode == "nonnegative"
    assert FactorizeMethod.SSNMTF.sign_mode == "mixed"
    assert FactorizeMethod.PNMF.sign_mode is None
    with pytest.raises(ValueError):
        FactorizeMethod.parse("nmf")


# objective ----------------------------------------------------------------------

def test_objective_hand_example():
    A = np.ones((2, 2))
    H = np.full((2, 1), 1 / np.sqrt(2))
    # H H^T = 0.5 everywhere; residual 0.5 in four cells
    assert objective_single(A, H, method="snmf") == pytest.approx(1.0, abs=1e-15)
    # H H^T A = A here, so the projective residual vanishes
    assert objective_single(A, H, method="pnmf") == pytest.approx(0.0, abs=1e-15)
    assert objective_single(A, H, np.array([[2.0]]), method="snmtf") == pytest.approx(0.0, abs=1e-15)


def test_objective_needs_centroid():
    with pytest.raises(MissingCentroid):
        objective_single(np.eye(2), np.ones((2, 1)), method="snmtf")
    with pytest.raises(ShapeMismatch):
        objective_single(np.eye(2), np.ones((2, 1)), np.eye(2), method="snmtf")
    with pytest.raises(ShapeMismatch):
        objective_single(np.eye(2), np.ones((3, 1)))


# fixed points -------------------------------------------------------------------

def test_snmf_fixed_point():
    H = block_factor([3, 4, 5])
    A = H @ H.T
    assert np.allclose(update_snmf(H, A), H, atol=1e-10, rtol=0)
    assert np.allclose(update_pnmf(H, A), H, atol=1e-10, rtol=0)


@pytest.mark.parametrize("update", [update_snmtf, update_ssnmtf])
def test_tri_fixed_point(update):
    H = block_factor([3, 4, 5])
    S = np.array([[2.0, 0.5, 0.1], [0.5, 3.0, 0.2], [0.1, 0.2, 1.5]])
    H2, S2 = update(H, S, H @ S @ H.T)
    assert np.allclose(H2, H, atol=1e-10, rtol=0)
    assert np.allclose(S2, S, atol=1e-10, rtol=0)


def test_closed_form_centroid_recovers_mixed_sign():
    rng = np.random.default_rng(0)
    H = rng.random((15, 3))
    S = np.array([[1.0, -0.7, 0.2], [-0.7, 2.0, -0.3], [0.2, -0.3, 0.5]])
    assert np.allclose(centroid_closed_form(H, H @ S @ H.T), S, atol=1e-10)


def test_closed_form_centroid_singular_gram_uses_ridge():
    H = np.ones((5, 2))
    S = centroid_closed_form(H, np.ones((5, 5)))
    assert np.all(np.isfinite(S))


# update contracts ---------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(list(FactorizeMethod)))
def test_updates_preserve_nonnegativity(seed, method):
    rng = np.random.default_rng(seed)
    A = random_symmetric(rng, 12, density=0.3)
    H = draw_factor(rng, 12, 3)
    if method is FactorizeMethod.SNMF:
        out = [update_snmf(H, A)]
    elif method is FactorizeMethod.PNMF:
        out = [update_pnmf(H, A)]
    elif method is FactorizeMethod.SNMTF:
        out = update_snmtf(H, initial_centroid(H, A), A)
    else:
        out = update_ssnmtf(H, initial_centroid(H, A), A)[:1]
    for M in out:
        assert np.all(M >= 0) and np.all(np.isfinite(M))


def test_zero_entries_stay_zero():
    rng = np.random.default_rng(3)
    A = random_symmetric(rng, 10)
    H = draw_factor(rng, 10, 2)
    H[0, 1] = 0.0
    assert update_snmf(H, A)[0, 1] == 0.0
    assert update_pnmf(H, A)[0, 1] == 0.0


def test_snmtf_rejects_negative_centroid():
    H = block_factor([2, 2])
    with pytest.raises(SignModeMismatch):
        update_snmtf(H, np.array([[1.0, -1.0], [-1.0, 1.0]]), np.eye(4))


def test_rescue_dead_columns():
    H = np.ones((6, 3))
    H[:, 1] = 0.0
    out = rescue_dead_columns(H, np.random.default_rng(0), 1e-12)
    assert np.all(out[:, 1] > 0)
    assert np.array_equal(out[:, [0, 2]], H[:, [0, 2]])
    assert rescue_dead_columns(np.ones((3, 2)), np.random.default_rng(0), 1e-12) is not None


def test_iterate_flags_non_finite():
    cfg = SolverConfig(k=1, max_iters=5)
    with pytest.raises(NumericalFailure):
        iterate((np.ones((2, 1)),), lambda s: (s[0] * np.nan,),
                lambda s: float(np.sum(s[0])), cfg, np.random.default_rng(0))


# solver runs --------------------------------------------------------------------

@pytest.mark.parametrize("method", list(FactorizeMethod))
def test_single_iteration_trace(method):
    A, _ = two_block(np.random.default_rng(1), n=20)
    res = factorize(A, method, SolverConfig(k=2, max_iters=1))
    assert res.iterations_run == 1 == len(res.objective_trace)
    assert np.isfinite(res.initial_objective)
    assert (res.S is not None) == method.uses_centroid


@pytest.mark.parametrize("method", list(FactorizeMethod))
def test_factorize_deterministic(method):
    A, _ = two_block(np.random.default_rng(2), n=30)
    cfg = SolverConfig(k=2, seed=11, max_iters=50)
    a, b = factorize(A, method, cfg), factorize(A, method, cfg)
    assert np.array_equal(a.H, b.H)
    assert a.objective_trace == b.objective_trace


@pytest.mark.parametrize("method", list(FactorizeMethod))
def test_recovers_planted_blocks(method):
    A, labels = two_block(np.random.default_rng(4), n=60, p_in=0.5, p_out=0.05)
    res = factorize(A, method, SolverConfig(k=2, seed=0))
    assert adjusted_rand_index(hard_clustering(res.H), labels) == 1.0
    assert np.all(res.H >= 0)
    assert not np.any(np.all(res.H < 1e-12, axis=0))


@pytest.mark.parametrize("method", list(FactorizeMethod))
@pytest.mark.parametrize("scale", [0.01, 7.0])
def test_labels_invariant_to_scaling(method, scale):
    A, _ = two_block(np.random.default_rng(5), n=60, p_in=0.5, p_out=0.05)
    cfg = SolverConfig(k=2, seed=3)
    base = hard_clustering(factorize(A, method, cfg).H).labels
    scaled = hard_clustering(factorize(scale * A, method, cfg).H).labels
    assert same_partition(base, scaled)


def test_explicit_start():
    A, _ = two_block(np.random.default_rng(6), n=20)
    H0 = draw_factor(np.random.default_rng(0), 20, 2)
    res = factorize(A, "snmf", SolverConfig(k=2, seed=0, max_iters=3), H0=H0)
    ref = factorize(A, "snmf", SolverConfig(k=2, seed=0, max_iters=3))
    assert np.array_equal(res.H, ref.H)
    with pytest.raises(ShapeMismatch):
        factorize(A, "snmf", SolverConfig(k=2), H0=np.ones((20, 3)))
    with pytest.raises(ShapeMismatch):
        factorize(A, "snmf", SolverConfig(k=25))


def test_ssnmtf_descends():
    # empirical check at the looser slack the alternating closed form allows
    for seed in range(5):
        A = random_symmetric(np.random.default_rng(100 + seed), 40)
        res = factorize(A, "ssnmtf", SolverConfig(k=3, seed=seed, max_iters=200, rel_tol=1e-14))
        tr = np.array([res.initial_objective] + res.objective_trace)
        assert np.all(np.diff(tr) <= 1e-6 * tr[:-1])


@pytest.mark.parametrize("method", ["snmf", "pnmf"])
def test_projective_rules_oscillate_in_scale(method):
    """The SNMF/PNMF rules drive H to the orthonormal shell, not to the
    least-squares minimiser; near the fixed point the column scale flips
    between two values, so the objective alternates while span(H) settles.
    """
    A = random_symmetric(np.random.default_rng(7), 60)
    res = factorize(A, method, SolverConfig(k=4, seed=0, max_iters=400, rel_tol=1e-15))
    tr = np.array(res.objective_trace)
    assert not res.converged
    rises = np.diff(tr) > 1e-9 * tr[:-1]
    assert rises[-50:].sum() >= 20
    # the swing between consecutive iterates dwarfs the drift of each phase
    swing = abs(tr[-1] - tr[-2])
    drift = abs(tr[-1] - tr[-3])
    assert swing > 1e-2 * tr[-1]
    assert drift < 1e-3 * swing
