import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherelift.errors import (
    DimensionMismatch,
    DomainError,
    MaxIterExceeded,
    NotPositiveDefinite,
)
from spherelift.model import energy
from spherelift.oracle import k2_stationary
from spherelift.solver import (
    cholesky_upper,
    default_lambda,
    dual_to_primal,
    kkt_residual,
    maxcut_gap_bound,
    objective,
    solve_maxcut_limit,
    solve_regularized,
)

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
# beta * 2 a s* + 0.5 ln(1 - s*^2) at a = 1/2, beta = 1, 40-digit mpmath
Q_STAR_HALF = 0.3774280762200931


def _random_symmetric(rng, k, scale=1.0):
    A = rng.normal(scale=scale, size=(k, k))
    return (A + A.T) / 2


def test_beta_zero_identity():
    rng = np.random.default_rng(0)
    A = _random_symmetric(rng, 5)
    rep = solve_regularized(A, 0.0)
    np.testing.assert_allclose(rep.S, np.eye(5), atol=1e-12)
    assert rep.q_star == pytest.approx(0.0, abs=1e-12)
    assert rep.converged


def test_golden_ratio_instance():
    rep = solve_regularized([[0, 0.5], [0.5, 0]], 1.0)
    assert rep.S[0, 1] == pytest.approx(GOLDEN, abs=1e-12)
    assert rep.q_star == pytest.approx(Q_STAR_HALF, abs=1e-12)
    np.testing.assert_array_equal(np.diag(rep.S), [1.0, 1.0])
    np.testing.assert_allclose(rep.R.T @ rep.R, rep.S, atol=1e-12)
    assert rep.iterations < 20


@pytest.mark.parametrize("a", [-2.0, -0.5, 0.3, 1.0])
@pytest.mark.parametrize("beta", [0.2, 3.0])
def test_k2_matches_bisection(a, beta):
    rep = solve_regularized([[0.0, a], [a, 0.0]], beta)
    assert rep.S[0, 1] == pytest.approx(k2_stationary(a, beta), abs=1e-10)


def test_k3_all_ones_grid_search():
    # symmetric maximizer has S_ij = s for all i != j; objective 6 beta s + 0.5 ln((1-s)^2 (1+2s)) + 3 beta
    beta = 0.5
    s = np.arange(-0.5 + 1e-6, 1.0, 1e-6)
    f = 6 * beta * s + 0.5 * np.log((1 - s) ** 2 * (1 + 2 * s))
    s_best = s[np.argmax(f)]
    rep = solve_regularized(np.ones((3, 3)), beta)
    off = rep.S[np.triu_indices(3, 1)]
    np.testing.assert_allclose(off, s_best, atol=2e-6)
    assert rep.q_star == pytest.approx(3 * beta + f.max(), abs=1e-9)


def test_report_to_json():
    rep = solve_regularized([[0, 0.5], [0.5, 0]], 1.0)
    d = json.loads(rep.to_json())
    assert set(d) == {"q_star", "S_star", "R_star", "lambda", "iterations", "residual", "converged"}
    assert d["converged"] is True
    assert d["q_star"] == pytest.approx(Q_STAR_HALF, abs=1e-12)


def test_max_iter_report():
    rng = np.random.default_rng(3)
    A = _random_symmetric(rng, 6)
    with pytest.raises(MaxIterExceeded) as info:
        solve_regularized(A, 5.0, max_iter=1)
    rep = info.value.report
    assert rep.converged is False
    assert rep.R_star is None
    assert rep.residual > 1e-10
    assert rep.to_dict()["R_star"] is None


def test_bad_beta():
    with pytest.raises(DomainError):
        solve_regularized(np.eye(2), -1.0)
    with pytest.raises(DomainError):
        solve_regularized(np.eye(2), float("nan"))


def test_non_pd_warm_start_falls_back():
    rep = solve_regularized([[0, 1], [1, 0]], 1.0, lam0=[-5.0, -5.0])
    assert rep.converged
    assert rep.S[0, 1] == pytest.approx(k2_stationary(1.0, 1.0), abs=1e-10)


class TestCholeskyUpper:
    def test_identity(self):
        np.testing.assert_array_equal(cholesky_upper(np.eye(3)).entries, np.eye(3))

    def test_k2(self):
        s = 0.3
        R = cholesky_upper([[1, s], [s, 1]]).entries
        np.testing.assert_allclose(R, [[1, s], [0, np.sqrt(1 - s * s)]], atol=1e-15)

    def test_singular(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky_upper([[1, 1], [1, 1]])
        with pytest.raises(NotPositiveDefinite):
            cholesky_upper([[1, 2], [2, 1]])


class TestDualToPrimal:
    def test_diagonal_case(self):
        S = dual_to_primal([2.0, 4.0], np.zeros((2, 2)), 1.0)
        np.testing.assert_allclose(S, np.diag([0.5, 0.25]))

    def test_k2_inverse(self):
        # (Diag(3,3) - 2*[[0,1],[1,0]])^{-1} = [[3,2],[2,3]] / 5
        S = dual_to_primal([3.0, 3.0], [[0, 1], [1, 0]], 1.0)
        np.testing.assert_allclose(S, np.array([[3, 2], [2, 3]]) / 5, atol=1e-15)

    def test_not_pd(self):
        with pytest.raises(NotPositiveDefinite):
            dual_to_primal([1.0, 1.0], [[0, 1], [1, 0]], 1.0)

    def test_shape(self):
        with pytest.raises(DimensionMismatch):
            dual_to_primal([1.0, 1.0, 1.0], np.eye(2), 1.0)


_instance = st.tuples(st.integers(2, 6), st.integers(0, 2**32 - 1),
                      st.floats(0.05, 5.0))


@settings(max_examples=40, deadline=None)
@given(_instance)
def test_kkt_residual_small(inst):
    k, seed, beta = inst
    A = _random_symmetric(np.random.default_rng(seed), k)
    rep = solve_regularized(A, beta)
    assert kkt_residual(rep, A, beta) <= 1e-8
    assert np.all(np.diag(rep.S) == 1.0)
    assert np.min(np.linalg.eigvalsh(rep.S)) > 0


@settings(max_examples=15, deadline=None)
@given(_instance)
def test_multistart_uniqueness(inst):
    k, seed, beta = inst
    rng = np.random.default_rng(seed)
    A = _random_symmetric(rng, k)
    ref = solve_regularized(A, beta).S
    base = default_lambda(A, beta)
    for _ in range(5):
        lam0 = base * rng.uniform(0.5, 5.0, size=k) + rng.uniform(0.5, 5.0)
        lam0 = np.maximum(lam0, base)  # stays diagonally dominant
        S = solve_regularized(A, beta, lam0=lam0).S
        assert np.linalg.norm(S - ref) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(_instance)
def test_solution_beats_perturbations(inst):
    k, seed, beta = inst
    rng = np.random.default_rng(seed)
    A = _random_symmetric(rng, k)
    rep = solve_regularized(A, beta)
    for _ in range(10):
        X = rng.normal(size=(k + 3, k))
        X /= np.linalg.norm(X, axis=0)
        T = X.T @ X
        for t in (0.5, 0.1, 1e-3):
            S = (1 - t) * rep.S + t * T
            assert objective(S, A, beta) <= rep.q_star + 1e-10


def test_envelope_derivative():
    # d q*/d beta = tr(A S*) by the envelope theorem
    rng = np.random.default_rng(11)
    A = _random_symmetric(rng, 4)
    beta, h = 0.8, 1e-5
    qp = solve_regularized(A, beta + h).q_star
    qm = solve_regularized(A, beta - h).q_star
    fd = (qp - qm) / (2 * h)
    assert fd == pytest.approx(energy(solve_regularized(A, beta).S, A), abs=1e-7)


def test_scaling_invariance():
    rng = np.random.default_rng(12)
    A = _random_symmetric(rng, 4)
    S1 = solve_regularized(A, 1.5).S
    S2 = solve_regularized(3.0 * A, 0.5).S
    np.testing.assert_allclose(S1, S2, atol=1e-10)


def test_permutation_equivariance():
    rng = np.random.default_rng(13)
    A = _random_symmetric(rng, 5)
    P = np.eye(5)[rng.permutation(5)]
    S1 = solve_regularized(A, 1.2).S
    S2 = solve_regularized(P @ A @ P.T, 1.2).S
    np.testing.assert_allclose(P @ S1 @ P.T, S2, atol=1e-10)


class TestMaxcutLimit:
    def test_monotone_and_bounded(self):
        a = 0.5
        A = np.array([[0, a], [a, 0]])
        path = solve_maxcut_limit(A, [1, 10, 100, 1000], q_ref=1.0)
        assert np.all(np.diff(path.values) > 0)
        for b, v, g in zip(path.betas, path.values, path.gaps_model):
            assert 1.0 - v > 0
            assert 1.0 - v <= g + 1e-12
            assert g == pytest.approx(maxcut_gap_bound(b, 1.0, 0.0, 2))
        # closed-form check at every beta
        for b, v in zip(path.betas, path.values):
            assert v == pytest.approx(2 * a * k2_stationary(a, b), abs=1e-9)

    def test_zero_matrix(self):
        path = solve_maxcut_limit(np.zeros((3, 3)), [1, 2, 4])
        assert path.values == [0.0, 0.0, 0.0]
        assert path.gaps_model == [None, None, None]

    @pytest.mark.parametrize("sched", [[], [0.5, 2], [2, 2], [3, 2]])
    def test_bad_schedule(self, sched):
        with pytest.raises(DomainError):
            solve_maxcut_limit(np.eye(2), sched)

    def test_random_instance_monotone(self):
        A = _random_symmetric(np.random.default_rng(21), 6)
        path = solve_maxcut_limit(A, [1, 3, 10, 30, 100, 300])
        assert all(v2 >= v1 - 1e-9 for v1, v2 in zip(path.values, path.values[1:]))
