import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from degen_mixed import linalg as la


def rel_residual(A, x, b):
    return np.linalg.norm(A @ x - b) / max(1.0, np.linalg.norm(b))


def test_lu_solve_identity():
    assert np.allclose(la.lu_solve(np.eye(3), [1.0, 2.0, 3.0]), [1, 2, 3])


def test_lu_solve_diagonal_sparse():
    x = la.lu_solve(sp.diags([2.0, 4.0]).tocsc(), np.array([2.0, 8.0]))
    assert np.allclose(x, [1.0, 2.0])


@pytest.mark.parametrize("sparse", [False, True])
def test_lu_solve_random_residual(sparse):
    rng = np.random.default_rng(1)
    A = rng.standard_normal((50, 50)) + 10 * np.eye(50)
    b = rng.standard_normal(50)
    x = la.lu_solve(sp.csc_matrix(A) if sparse else A, b)
    assert rel_residual(A, x, b) <= 1e-10


def test_lu_singular_and_nonfinite():
    with pytest.raises(la.SingularMatrix):
        la.lu_solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.ones(2))
    with pytest.raises(la.SingularMatrix):
        la.lu_solve(sp.csc_matrix(np.array([[1.0, 0.0], [0.0, 0.0]])), np.ones(2))
    with pytest.raises(la.NonFinite):
        la.lu_solve(np.array([[1.0, np.nan], [0.0, 1.0]]), np.ones(2))
    with pytest.raises(la.NonFinite):
        la.lu_solve(np.eye(2), np.array([np.inf, 0.0]))


def test_generalized_eig_examples():
    lam, _ = la.sym_generalized_eig(np.diag([1.0, 4.0]), np.eye(2))
    assert np.allclose(lam, [1, 4])
    lam, _ = la.sym_generalized_eig(np.eye(2), np.diag([1.0, 4.0]))
    assert np.allclose(lam, [0.25, 1])


def test_generalized_eig_residual_and_orthonormality():
    rng = np.random.default_rng(2)
    W = rng.standard_normal((10, 10))
    A = W + W.T
    V = rng.standard_normal((10, 10))
    M = V @ V.T + 10 * np.eye(10)
    lam, X = la.sym_generalized_eig(A, M)
    assert np.all(np.diff(lam) >= 0)
    for i in range(10):
        assert np.linalg.norm(A @ X[:, i] - lam[i] * M @ X[:, i]) <= 1e-8 * np.linalg.norm(A)
    assert np.allclose(X.T @ M @ X, np.eye(10), atol=1e-10)
    assert np.allclose(lam, sla.eigh(A, M, eigvals_only=True), rtol=1e-10, atol=1e-12)


def test_generalized_eig_errors():
    with pytest.raises(la.NotSymmetric):
        la.sym_generalized_eig(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2))
    with pytest.raises(la.GramNotSPD):
        la.sym_generalized_eig(np.eye(2), np.diag([1.0, -1.0]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_generalized_eig_congruence_invariance(seed):
    rng = np.random.default_rng(seed)
    n = 6
    W = rng.standard_normal((n, n))
    A = W + W.T
    V = rng.standard_normal((n, n))
    M = V @ V.T + n * np.eye(n)
    P = rng.standard_normal((n, n)) + 3 * np.eye(n)
    lam1 = la.sym_generalized_eigvals(A, M)
    lam2 = la.sym_generalized_eigvals(P.T @ A @ P, P.T @ M @ P)
    assert np.allclose(lam1, lam2, rtol=1e-8, atol=1e-8 * np.abs(lam1).max())


def test_nullspace_examples():
    Z = la.nullspace_basis(np.array([[1.0, 1.0]]), np.eye(2))
    assert Z.shape == (2, 1)
    assert np.allclose(np.abs(Z[:, 0]), [2 ** -0.5, 2 ** -0.5])
    assert Z[0, 0] == pytest.approx(-Z[1, 0])
    assert la.nullspace_basis(np.array([[2.0, 1.0], [1.0, 3.0]]), np.eye(2)).shape == (2, 0)
    with pytest.raises(la.GramNotSPD):
        la.nullspace_basis(np.ones((1, 2)), -np.eye(2))


def test_nullspace_random_full_rank():
    rng = np.random.default_rng(3)
    B = rng.standard_normal((3, 8))
    V = rng.standard_normal((8, 8))
    Mx = V @ V.T + np.eye(8)
    Z = la.nullspace_basis(B, Mx)
    assert Z.shape == (8, 5)
    assert np.abs(B @ Z).max() <= 1e-10
    assert np.abs(Z.T @ Mx @ Z - np.eye(5)).max() <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 20), st.integers(0, 10_000))
def test_nullspace_dimension_matches_rank_oracle(m, n, r, seed):
    rng = np.random.default_rng(seed)
    r = min(r, m, n)
    B = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
    Z = la.nullspace_basis(B, np.eye(n))
    assert Z.shape[1] == sla.null_space(B, rcond=1e-11).shape[1] == n - r


def test_saddle_examples():
    K = la.saddle_factorize(np.eye(2), np.array([[1.0, 0.0]]))
    b = np.array([1.0, 2.0, 3.0])
    x = K.solve(b)
    assert K.residual(x, b) <= 1e-12
    with pytest.raises(la.SingularMatrix):
        la.saddle_factorize(np.zeros((2, 2)), np.array([[1.0, 0.0]]))


def test_saddle_stokes_step_residual(stokes8):
    S = (stokes8.R + 0.1 * stokes8.A).tocsr()
    K = la.saddle_factorize(S, stokes8.B)
    rng = np.random.default_rng(0)
    b = rng.standard_normal(stokes8.n + stokes8.m)
    x = K.solve(b)
    assert K.residual(x, b) <= 1e-9
    assert K.residual(x, b) <= 1e-10


def test_symmetrize_refuses_asymmetric():
    M = np.array([[1.0, 1.0], [1.0 + 1e-6, 1.0]])
    with pytest.raises(la.NotSymmetric):
        la.symmetrize(M)
    assert np.allclose(la.symmetrize(M, tol=1e-3), M.T + (M - M.T) / 2)


def test_numerical_rank():
    assert la.numerical_rank(np.zeros((2, 3))) == 0
    assert la.numerical_rank(np.array([[1.0, 0.0], [0.0, 1e-13]])) == 1
