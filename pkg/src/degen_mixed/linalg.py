"""Dense and sparse linear algebra kernels.

Everything here is desk scale: generalized eigenproblems and kernel bases
are computed densely, linear solves go through SuperLU for sparse input and
LAPACK for dense input.
"""

import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

PIVOT_TOL = 1e-14
RANK_TOL = 1e-11
SYM_TOL = 1e-12


class LinAlgError(Exception):
    pass


class SingularMatrix(LinAlgError):
    pass


class NonFinite(LinAlgError):
    pass


class NotSymmetric(LinAlgError):
    pass


class GramNotSPD(LinAlgError):
    pass


def as_dense(M):
    if sp.issparse(M):
        return M.toarray()
    return np.asarray(M, dtype=float)


def as_sparse(M):
    if sp.issparse(M):
        return sp.csr_matrix(M, dtype=float)
    return sp.csr_matrix(np.asarray(M, dtype=float))


def _max_abs(M):
    if sp.issparse(M):
        return abs(M).max() if M.nnz else 0.0
    return np.abs(M).max() if M.size else 0.0


def check_finite(*arrays):
    for a in arrays:
        data = a.data if sp.issparse(a) else np.asarray(a, dtype=float)
        if not np.all(np.isfinite(data)):
            raise NonFinite("input contains NaN or Inf")


def asymmetry(M):
    """Relative Frobenius asymmetry ||M - M^T|| / ||M|| (0 for M = 0)."""
    M = as_dense(M)
    nrm = np.linalg.norm(M)
    if nrm == 0.0:
        return 0.0
    return np.linalg.norm(M - M.T) / nrm


def symmetrize(M, tol=SYM_TOL):
    """Return (M + M^T)/2, refusing when M is not symmetric to `tol`."""
    err = asymmetry(M)
    if err > tol:
        raise NotSymmetric(f"relative asymmetry {err:.3e} exceeds {tol:.1e}")
    if sp.issparse(M):
        return ((M + M.T) * 0.5).tocsr()
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


class Factorization:
    """LU factorization of a square matrix, reusable for many right-hand sides.

    Construction raises :class:`SingularMatrix` when a pivot of U falls below
    ``PIVOT_TOL`` times the largest absolute entry of the matrix.
    """

    def __init__(self, A):
        check_finite(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        self.shape = A.shape
        self.n = A.shape[0]
        self._sparse = sp.issparse(A)
        self._A = sp.csc_matrix(A, dtype=float) if self._sparse else np.array(A, dtype=float)
        if self.n == 0:
            return
        scale = _max_abs(self._A)
        if scale == 0.0:
            raise SingularMatrix("zero matrix")
        if self._sparse:
            try:
                self._lu = spla.splu(self._A)
            except RuntimeError as exc:
                raise SingularMatrix(str(exc)) from None
            pivots = np.abs(self._lu.U.diagonal())
        else:
            with warnings.catch_warnings():
                # exact zero pivots are reported through SingularMatrix below
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                self._lu = sla.lu_factor(self._A, check_finite=False)
            pivots = np.abs(np.diag(self._lu[0]))
        if pivots.min() < PIVOT_TOL * scale:
            raise SingularMatrix(
                f"pivot {pivots.min():.3e} below {PIVOT_TOL:.0e} x max entry {scale:.3e}")

    def _raw_solve(self, b):
        if self._sparse:
            return self._lu.solve(b)
        return sla.lu_solve(self._lu, b, check_finite=False)

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        check_finite(b)
        if self.n == 0:
            return np.zeros_like(b)
        x = self._raw_solve(b)
        # one step of iterative refinement when the residual misses the contract
        r = b - self._A @ x
        bn = max(1.0, np.linalg.norm(b))
        if np.linalg.norm(r) > 1e-12 * bn:
            x = x + self._raw_solve(r)
        return x

    def residual(self, x, b):
        b = np.asarray(b, dtype=float)
        return np.linalg.norm(self._A @ x - b) / max(1.0, np.linalg.norm(b))


def lu_solve(A, b):
    """Solve ``A x = b`` for dense or sparse square ``A``."""
    return Factorization(A).solve(b)


def saddle_matrix(S, B):
    """Assemble the block matrix [[S, B^T], [B, 0]] in CSC format."""
    S = as_sparse(S)
    B = as_sparse(B)
    if B.shape[0] == 0:
        return S.tocsc()
    return sp.bmat([[S, B.T], [B, None]], format="csc")


def saddle_factorize(S, B):
    """Factorize [[S, B^T], [B, 0]]; solve() takes and returns stacked vectors."""
    return Factorization(saddle_matrix(S, B))


def cholesky(M):
    """Lower Cholesky factor of a dense SPD matrix, raising GramNotSPD."""
    M = as_dense(M)
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise GramNotSPD("Cholesky factorization failed") from None


def sym_generalized_eig(A, Mgram):
    """All eigenpairs of A x = lam Mgram x, eigenvalues ascending.

    Eigenvectors are Mgram-orthonormal.
    """
    A = as_dense(A)
    Mgram = as_dense(Mgram)
    check_finite(A, Mgram)
    A = symmetrize(A)
    Mgram = symmetrize(Mgram)
    L = cholesky(Mgram)
    # reduce to a standard problem with the Cholesky factor: C = L^-1 A L^-T
    W = sla.solve_triangular(L, A, lower=True)
    C = sla.solve_triangular(L, W.T, lower=True)
    lam, Y = np.linalg.eigh(0.5 * (C + C.T))
    X = sla.solve_triangular(L.T, Y, lower=False)
    return lam, X


def sym_generalized_eigvals(A, Mgram):
    A = as_dense(A)
    Mgram = as_dense(Mgram)
    check_finite(A, Mgram)
    A = symmetrize(A)
    Mgram = symmetrize(Mgram)
    L = cholesky(Mgram)
    W = sla.solve_triangular(L, A, lower=True)
    C = sla.solve_triangular(L, W.T, lower=True)
    return np.linalg.eigvalsh(0.5 * (C + C.T))


def numerical_rank(B, tol=RANK_TOL):
    B = as_dense(B)
    if min(B.shape) == 0:
        return 0
    s = np.linalg.svd(B, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def nullspace_basis(B, Mx, tol=RANK_TOL):
    """Mx-orthonormal basis Z of the null space of B.

    The kernel dimension is the number of singular values of B at or below
    ``tol`` times the largest one (plus the column excess).
    """
    B = as_dense(B)
    Mx = as_dense(Mx)
    cholesky(Mx)
    n = B.shape[1]
    if B.shape[0] == 0:
        N = np.eye(n)
    else:
        _, s, Vt = np.linalg.svd(B, full_matrices=True)
        rank = 0 if s.size == 0 or s[0] == 0.0 else int(np.sum(s > tol * s[0]))
        N = Vt[rank:].T
    if N.shape[1] == 0:
        return N
    G = N.T @ Mx @ N
    L = cholesky(0.5 * (G + G.T))
    return sla.solve_triangular(L, N.T, lower=True).T
