"""Independent reference implementations used by the tests.

These avoid the package's saddle-point factorization, kernel basis and
lift: constraints are eliminated with scipy.linalg.null_space and pinv,
eigenvalues come from scipy.linalg.eigh on the explicit pencil.
"""

import numpy as np
import scipy.linalg as sla


def dense(M):
    return M.toarray() if hasattr(M, "toarray") else np.asarray(M, dtype=float)


def elimination_backward_euler(sys, dt):
    """Backward Euler in history form by explicit constraint elimination.

    Each step writes u = p + N c with B p = g (minimum-norm particular
    solution) and N an orthonormal kernel basis, solves the projected
    equation for c, then recovers lam from the full residual by least squares.
    """
    R, A, B = dense(sys.R), dense(sys.A), dense(sys.B)
    n, m = A.shape[0], B.shape[0]
    N = sla.null_space(B) if m else np.eye(n)
    Bp = np.linalg.pinv(B) if m else np.zeros((n, 0))
    steps = int(round(sys.T / dt))
    dt = sys.T / steps
    K = R + dt * A
    w = R @ sys.u0
    U = np.zeros((steps + 1, n))
    L = np.zeros((steps + 1, m))
    for k in range(1, steps + 1):
        t = k * dt
        rhs = w + dt * np.asarray(sys.f(t))
        p = Bp @ np.asarray(sys.g(t)).reshape(m)
        c = np.linalg.solve(N.T @ K @ N, N.T @ (rhs - K @ p))
        u = p + N @ c
        if m:
            L[k] = np.linalg.lstsq(B.T, rhs - K @ u, rcond=None)[0]
        U[k] = u
        w = w + dt * (np.asarray(sys.f(t)) - A @ u)
    return U, L


def inf_sup_by_pencil(B, Mx, Mm):
    """sqrt of the smallest eigenvalue of B Mx^-1 B^T x = lam Mm x."""
    B, Mx, Mm = dense(B), dense(Mx), dense(Mm)
    S = B @ np.linalg.solve(Mx, B.T)
    return float(np.sqrt(sla.eigh(0.5 * (S + S.T), Mm, eigvals_only=True)[0]))


def inf_sup_by_sup(B, Mx, Mm):
    """inf_mu sup_v (mu^T B v) / (|v|_Mx |mu|_Mm) via the Mx-whitened SVD.

    sup_v mu^T B v / |v|_Mx = |L^-1 B^T mu| with Mx = L L^T, so beta is the
    smallest singular value of Lm^-1 B L^-T with Mm = Lm Lm^T.
    """
    B, Mx, Mm = dense(B), dense(Mx), dense(Mm)
    L = np.linalg.cholesky(Mx)
    Lm = np.linalg.cholesky(Mm)
    W = sla.solve_triangular(Lm, sla.solve_triangular(L, B.T, lower=True).T, lower=True)
    return float(np.linalg.svd(W, compute_uv=False)[-1])


def garding_alpha(sys, gamma):
    """Smallest eigenvalue of the kernel pencil using an orthonormal kernel basis."""
    A, R, B, Mx = dense(sys.A), dense(sys.R), dense(sys.B), dense(sys.Mx)
    N = sla.null_space(B) if B.shape[0] else np.eye(A.shape[0])
    K = N.T @ (0.5 * (A + A.T) + gamma * 0.5 * (R + R.T)) @ N
    return float(sla.eigh(K, N.T @ Mx @ N, eigvals_only=True)[0])


def min_norm_lift(B, Mx, g):
    """argmin |z|_Mx subject to B z = g, via the KKT system solved with numpy."""
    B, Mx = dense(B), dense(Mx)
    n, m = Mx.shape[0], B.shape[0]
    K = np.block([[Mx, B.T], [B, np.zeros((m, m))]])
    return np.linalg.solve(K, np.concatenate([np.zeros(n), g]))[:n]
