"""Degenerate mixed parabolic systems at the Galerkin level.

A :class:`DiscreteMixedSystem` holds the matrices of

    d/dt [R u + B^T lam] + A u = f(t),    B u = g(t),    R u(0) = R u0,

where R may be singular. This module certifies the well-posedness hypotheses
(inf-sup for B, symmetry and monotonicity of R, symmetry of A, Garding
inequality on the kernel of B, initial datum in the kernel closure,
regularity of g), integrates the system in time, recovers the multiplier
constructively, and reports the a-priori energy estimate.
"""

import math
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.integrate import trapezoid

from . import linalg as la

SCHEMES = ("backward-euler", "crank-nicolson")
DEFAULT_GAMMA_GRID = (0.0, 1.0, 10.0, 100.0)
ALPHA_TOL = 1e-10


class CertificationFailed(Exception):
    def __init__(self, certificate):
        failed = [k for k, ok in certificate.verdict.items() if not ok]
        super().__init__(f"hypotheses failed: {', '.join(failed)}")
        self.certificate = certificate


class RankDeficientB(la.LinAlgError):
    pass


class EmptyKernelGrid(ValueError):
    pass


class NoPositiveAlpha(ValueError):
    pass


class StepMatrixSingular(la.LinAlgError):
    pass


def _zero_load(size):
    def load(t):
        return np.zeros(size)
    return load


@dataclass(frozen=True, eq=False)
class DiscreteMixedSystem:
    R: object
    A: object
    B: object
    Mx: object
    My: object
    Mm: object
    f: object
    g: object
    gdot: object
    u0: np.ndarray
    T: float
    name: str = "system"
    g_regular: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.A.shape[0]
        m = self.B.shape[0]
        for label, M, shape in [("R", self.R, (n, n)), ("A", self.A, (n, n)),
                                ("B", self.B, (m, n)), ("Mx", self.Mx, (n, n)),
                                ("My", self.My, (n, n)), ("Mm", self.Mm, (m, m))]:
            if M.shape != shape:
                raise ValueError(f"{label} has shape {M.shape}, expected {shape}")
        la.check_finite(self.R, self.A, self.B, self.Mx, self.My, self.Mm, self.u0)
        if np.shape(self.u0) != (n,):
            raise ValueError(f"u0 has shape {np.shape(self.u0)}, expected ({n},)")
        if not self.T > 0:
            raise ValueError("final time must be positive")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[0]

    def replace(self, **changes):
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw.update(changes)
        # a stored certificate may not hold for the new data
        kw["meta"] = {k: v for k, v in self.meta.items() if k != "certificate"}
        return DiscreteMixedSystem(**kw)

    # cached factorizations; the system is immutable
    @cached_property
    def Mx_factor(self):
        return la.Factorization(la.as_sparse(self.Mx).tocsc())

    @cached_property
    def Mm_factor(self):
        return la.Factorization(la.as_sparse(self.Mm).tocsc())

    @cached_property
    def MxinvBt(self):
        if self.m == 0:
            return np.zeros((self.n, 0))
        return self.Mx_factor.solve(la.as_dense(self.B.T))

    @cached_property
    def schur(self):
        """Dense B Mx^-1 B^T."""
        S = la.as_dense(self.B @ self.MxinvBt) if self.m else np.zeros((0, 0))
        return 0.5 * (S + S.T)

    @cached_property
    def schur_factor(self):
        if la.numerical_rank(self.B) < self.m:
            raise RankDeficientB("B does not have full row rank")
        return sla.cho_factor(self.schur)

    @cached_property
    def kernel_basis(self):
        """Mx-orthonormal basis of the null space of B (dense, n x dim V)."""
        return la.nullspace_basis(self.B, self.Mx)


# ---------------------------------------------------------------- hypotheses

def inf_sup_constant(sys):
    """beta = sqrt(smallest eigenvalue of the pencil (B Mx^-1 B^T, Mm))."""
    if sys.m == 0:
        return math.inf
    if la.numerical_rank(sys.B) < sys.m:
        raise RankDeficientB("B does not have full row rank; inf-sup constant is zero")
    lam = la.sym_generalized_eigvals(sys.schur, sys.Mm)
    return float(math.sqrt(max(lam[0], 0.0)))


def garding_curve(sys, gamma_grid=DEFAULT_GAMMA_GRID):
    """alpha(gamma) for every grid point: smallest eigenvalue of
    (Z^T (sym A + gamma sym R) Z, Z^T Mx Z)."""
    Z = sys.kernel_basis
    if Z.shape[1] == 0:
        return [(float(g), math.inf) for g in gamma_grid]
    AZ = la.symmetrize(la.as_dense(Z.T @ (sys.A @ Z)), tol=1e-10)
    RZ = la.symmetrize(la.as_dense(Z.T @ (sys.R @ Z)), tol=1e-10)
    G = Z.T @ (sys.Mx @ Z)
    out = []
    for gamma in gamma_grid:
        lam = la.sym_generalized_eigvals(AZ + gamma * RZ, G)
        scale = max(abs(lam[0]), abs(lam[-1]))
        alpha = float(lam[0]) if lam[0] > ALPHA_TOL * scale else 0.0
        out.append((float(gamma), alpha))
    return out


def garding_constants(sys, gamma_grid=DEFAULT_GAMMA_GRID):
    """Smallest grid gamma with alpha(gamma) > 0, and that alpha."""
    gamma_grid = sorted(gamma_grid)
    if not gamma_grid:
        raise EmptyKernelGrid("empty gamma grid")
    for gamma, alpha in garding_curve(sys, gamma_grid):
        if alpha > 0:
            return gamma, alpha
    raise NoPositiveAlpha(f"Garding inequality fails on every gamma in {gamma_grid}")


def kernel_distance(sys, v):
    """Relative My-distance of v to span(Z)."""
    Z = sys.kernel_basis
    v = np.asarray(v, dtype=float)
    My = sys.My
    nv = math.sqrt(max(v @ (My @ v), 0.0))
    if Z.shape[1] == 0:
        return nv / max(1.0, nv)
    G = Z.T @ (My @ Z)
    c = np.linalg.solve(G, Z.T @ (My @ v))
    r = v - Z @ c
    return math.sqrt(max(r @ (My @ r), 0.0)) / max(1.0, nv)


def check_gdot(sys, samples=10, rtol=1e-6, seed=0):
    """Compare gdot with central differences of g at random times."""
    if sys.m == 0:
        return True, 0.0
    rng = np.random.default_rng(seed)
    delta = 1e-5 * max(sys.T, 1.0)
    worst = 0.0
    ok = True
    for t in rng.uniform(delta, sys.T - delta, samples):
        fd = (np.asarray(sys.g(t + delta)) - np.asarray(sys.g(t - delta))) / (2 * delta)
        gd = np.asarray(sys.gdot(t))
        scale = np.linalg.norm(gd) + np.linalg.norm(sys.g(t)) / max(sys.T, 1.0)
        err = np.linalg.norm(fd - gd)
        worst = max(worst, err / scale if scale > 0 else err)
        if err > rtol * scale:
            ok = False
    return ok, worst


@dataclass
class Certificate:
    beta: float
    symmetry_residual_R: float
    symmetry_residual_A: float
    monotonicity_margin: float
    gamma: float
    alpha: float
    u0_kernel_distance: float
    g_regularity_declared: bool
    gdot_fd_error: float
    kernel_dim: int
    garding_curve: list
    tolerances: dict
    verdict: dict

    @property
    def passed(self):
        return all(self.verdict.values())

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def certify(sys, u0_tol=1e-8, sym_tol=1e-10, mono_tol=1e-10, gdot_rtol=1e-6,
            gamma_grid=DEFAULT_GAMMA_GRID):
    """Check hypotheses H1-H6 numerically and collect the constants."""
    try:
        beta = inf_sup_constant(sys)
    except RankDeficientB:
        beta = 0.0
    Z = sys.kernel_basis
    if Z.shape[1]:
        RZ = la.as_dense(Z.T @ (sys.R @ Z))
        AZ = la.as_dense(Z.T @ (sys.A @ Z))
        sym_R = la.asymmetry(RZ)
        sym_A = la.asymmetry(AZ)
        G = Z.T @ (sys.My @ Z)
        if sym_R <= 1e-10:
            mono = float(la.sym_generalized_eigvals(0.5 * (RZ + RZ.T), G)[0])
        else:
            mono = -math.inf
        r_scale = max(1.0, float(np.abs(RZ).max()))
    else:
        sym_R = sym_A = 0.0
        mono = 0.0
        r_scale = 1.0
    curve = []
    gamma, alpha = math.nan, 0.0
    if sym_A <= sym_tol and sym_R <= sym_tol:
        curve = garding_curve(sys, sorted(gamma_grid))
        for g_, a_ in curve:
            if a_ > 0:
                gamma, alpha = g_, a_
                break
    if sys.m:
        z0 = lift_vperp(sys, 0.0) if beta > 0 else np.zeros(sys.n)
    else:
        z0 = np.zeros(sys.n)
    dist = kernel_distance(sys, sys.u0 - z0)
    gd_ok, gd_err = check_gdot(sys, rtol=gdot_rtol)
    verdict = {
        "H1": bool(beta > 0),
        "H2": bool(sym_R <= sym_tol and mono >= -mono_tol * r_scale),
        "H3": bool(sym_A <= sym_tol),
        "H4": bool(alpha > 0),
        "H5": bool(dist <= u0_tol),
        "H6": bool(sys.g_regular) and gd_ok,
    }
    return Certificate(
        beta=float(beta), symmetry_residual_R=float(sym_R), symmetry_residual_A=float(sym_A),
        monotonicity_margin=float(mono), gamma=float(gamma), alpha=float(alpha),
        u0_kernel_distance=float(dist),
        g_regularity_declared=bool(sys.g_regular), gdot_fd_error=float(gd_err),
        kernel_dim=int(Z.shape[1]), garding_curve=[list(p) for p in curve],
        tolerances={"u0": u0_tol, "symmetry": sym_tol, "monotonicity": mono_tol,
                    "gdot": gdot_rtol, "alpha": ALPHA_TOL, "rank": la.RANK_TOL},
        verdict=verdict)


# ---------------------------------------------------------------- lift and time stepping

def lift_vperp(sys, t, gval=None):
    """The Mx-orthogonal (to ker B) solution of B z = g(t)."""
    if sys.m == 0:
        return np.zeros(sys.n)
    g = np.asarray(sys.g(t) if gval is None else gval, dtype=float)
    y = sla.cho_solve(sys.schur_factor, g)
    return sys.MxinvBt @ y


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    u: np.ndarray        # (N+1, n)
    lam: np.ndarray      # (N+1, m)
    scheme: str
    dt: float

    @property
    def steps(self):
        return len(self.times) - 1

    def u_norms(self, gram):
        return np.sqrt(np.maximum(np.einsum("ti,ti->t", self.u, (gram @ self.u.T).T), 0.0))

    def lam_norms(self, gram):
        if self.lam.shape[1] == 0:
            return np.zeros(len(self.times))
        return np.sqrt(np.maximum(np.einsum("ti,ti->t", self.lam, (gram @ self.lam.T).T), 0.0))

    def constraint_residuals(self, sys):
        G = np.array([np.asarray(sys.g(t), dtype=float) for t in self.times]).reshape(
            len(self.times), sys.m)
        if sys.m == 0:
            return np.zeros(len(self.times)), np.zeros(len(self.times))
        r = (sys.B @ self.u.T).T - G
        return np.linalg.norm(r, axis=1), np.linalg.norm(G, axis=1)


def time_grid(T, dt):
    N = int(round(T / dt))
    if N < 1 or abs(N * dt - T) > 1e-9 * T:
        raise ValueError(f"dt={dt} does not divide T={T}")
    return np.linspace(0.0, T, N + 1), T / N


def _theta(scheme):
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}")
    return 1.0 if scheme == "backward-euler" else 0.5


def consistent_initial_state(sys):
    """u(0) satisfying B u = g(0), Z^T R u = Z^T R u0 on the range of Z^T R Z,
    and the algebraic equation Z^T (A u - f(0)) = 0 on its null space."""
    z0 = lift_vperp(sys, 0.0)
    Z = sys.kernel_basis
    if Z.shape[1] == 0:
        return z0
    KR = la.as_dense(Z.T @ (sys.R @ Z))
    KR = 0.5 * (KR + KR.T)
    KA = la.as_dense(Z.T @ (sys.A @ Z))
    ev, Q = np.linalg.eigh(KR)
    scale = max(abs(ev).max(), 1e-300)
    rng = ev > 1e-10 * scale
    Q1, Q0 = Q[:, rng], Q[:, ~rng]
    rhs1 = Q1.T @ (Z.T @ (sys.R @ (sys.u0 - z0)))
    rhs0 = Q0.T @ (Z.T @ (np.asarray(sys.f(0.0)) - sys.A @ z0))
    k1 = Q1.shape[1]
    M = np.zeros((Z.shape[1], Z.shape[1]))
    M[:k1, :k1] = Q1.T @ KR @ Q1
    M[k1:, :k1] = Q0.T @ KA @ Q1
    M[k1:, k1:] = Q0.T @ KA @ Q0
    ab = np.linalg.solve(M, np.concatenate([rhs1, rhs0]))
    return z0 + Z @ (Q1 @ ab[:k1] + Q0 @ ab[k1:])


def _step_factor(sys, S, certificate, dt, theta):
    try:
        return la.saddle_factorize(S, sys.B)
    except la.SingularMatrix as exc:
        gamma = certificate.gamma if certificate is not None else math.nan
        raise StepMatrixSingular(
            f"step matrix singular (dt*gamma = {dt * gamma:.3g}, theta={theta}): {exc}") from None


def integrate(sys, dt, scheme="backward-euler", certificate=None, check=True):
    """Time-step the mixed system in history form.

    The history variable w = R u + B^T lam starts at R u0 (lam(0) = 0) and
    each step solves [[R + theta dt A, B^T], [B, 0]] (u, lam) =
    (w + dt (theta f_new + (1-theta) f_old) - (1-theta) dt A u_old, g_new).
    """
    theta = _theta(scheme)
    times, dt = time_grid(sys.T, dt)
    if check:
        if certificate is None:
            certificate = sys.meta.get("certificate") or certify(sys)
        if not certificate.passed:
            raise CertificationFailed(certificate)
        if certificate.gamma * dt * theta >= 1.0:
            raise StepMatrixSingular(
                f"dt*gamma = {dt * certificate.gamma:.3g} violates the step condition "
                f"theta*dt*gamma < 1 for the certified gamma")
    R = la.as_sparse(sys.R)
    A = la.as_sparse(sys.A)
    n, m = sys.n, sys.m
    K = _step_factor(sys, (R + theta * dt * A).tocsr(), certificate, dt, theta)

    N = len(times) - 1
    U = np.zeros((N + 1, n))
    L = np.zeros((N + 1, m))
    f_old = np.asarray(sys.f(0.0), dtype=float)
    # u^0 is reported only; the scheme itself starts from the history w^0
    U[0] = consistent_initial_state(sys)
    w = R @ sys.u0
    for k in range(N):
        t1 = times[k + 1]
        f_new = np.asarray(sys.f(t1), dtype=float)
        g_new = np.asarray(sys.g(t1), dtype=float).reshape(m)
        rhs = w + dt * (theta * f_new + (1 - theta) * f_old)
        if theta != 1.0:
            rhs = rhs - (1 - theta) * dt * (A @ U[k])
        x = K.solve(np.concatenate([rhs, g_new]))
        U[k + 1] = x[:n]
        L[k + 1] = x[n:]
        if not (np.all(np.isfinite(U[k + 1])) and np.all(np.isfinite(L[k + 1]))):
            raise la.NonFinite(f"non-finite state at step {k + 1}")
        w = w + dt * (theta * (f_new - A @ U[k + 1]) + (1 - theta) * (f_old - A @ U[k]))
        f_old = f_new
    return Trajectory(times=times, u=U, lam=L, scheme=scheme, dt=dt)


def recover_multiplier(sys, traj, rule="left"):
    """Multiplier from the operator G(t) = R(u0 - u(t)) - int_0^t (A u - f).

    ``rule`` picks the time quadrature of the integral: "left" or "right"
    rectangles, or "trapezoid". The multiplier at t^n is the least-squares
    solution of B^T lam = G^n in the Mx^-1 inner product.
    """
    N = traj.steps
    if sys.m == 0:
        return np.zeros((N + 1, 0))
    dt = traj.dt
    F = np.array([np.asarray(sys.f(t), dtype=float) for t in traj.times])
    integrand = F - (sys.A @ traj.u.T).T
    if rule == "left":
        incr = integrand[:-1]
    elif rule == "right":
        incr = integrand[1:]
    elif rule == "trapezoid":
        incr = 0.5 * (integrand[:-1] + integrand[1:])
    else:
        raise ValueError(f"unknown rule {rule!r}")
    cum = np.vstack([np.zeros(sys.n), dt * np.cumsum(incr, axis=0)])
    Ru0 = sys.R @ sys.u0
    G = Ru0[None, :] - (sys.R @ traj.u.T).T + cum
    lam = sla.cho_solve(sys.schur_factor, sys.MxinvBt.T @ G.T).T
    lam[0] = 0.0
    return lam


def integrate_reduced(sys, dt, scheme="backward-euler", certificate=None, check=True):
    """Integrate the kernel problem for u~ = u - z, then rebuild u and recover lam.

    Kernel matrices Z^T R Z, Z^T A Z; load Z^T (f - A z - R dz/dt) with dz/dt
    from central differences of the lift; initial history Z^T R Z c0 with c0
    the My-projection of u0 - z(0) onto span(Z).
    """
    theta = _theta(scheme)
    times, dt = time_grid(sys.T, dt)
    if check:
        if certificate is None:
            certificate = sys.meta.get("certificate") or certify(sys)
        if not certificate.passed:
            raise CertificationFailed(certificate)
    Z = sys.kernel_basis
    N = len(times) - 1
    zs = np.array([lift_vperp(sys, t) for t in times])
    zdot = np.gradient(zs, times, axis=0) if N >= 1 else np.zeros_like(zs)
    F = np.array([np.asarray(sys.f(t), dtype=float) for t in times])
    load = (F - (sys.A @ zs.T).T - (sys.R @ zdot.T).T) @ Z
    KR = la.as_dense(Z.T @ (sys.R @ Z))
    KA = la.as_dense(Z.T @ (sys.A @ Z))
    try:
        K = la.Factorization(KR + theta * dt * KA)
    except la.SingularMatrix as exc:
        raise StepMatrixSingular(f"reduced step matrix singular: {exc}") from None
    C = np.zeros((N + 1, Z.shape[1]))
    # initial history from the My-projection of u0 - z(0) onto span(Z)
    G = Z.T @ (sys.My @ Z)
    c0 = np.linalg.solve(G, Z.T @ (sys.My @ (sys.u0 - zs[0])))
    w = KR @ c0
    C[0] = np.linalg.lstsq(Z, consistent_initial_state(sys) - zs[0], rcond=None)[0]
    for k in range(N):
        rhs = w + dt * (theta * load[k + 1] + (1 - theta) * load[k])
        if theta != 1.0:
            rhs = rhs - (1 - theta) * dt * (KA @ C[k])
        C[k + 1] = K.solve(rhs)
        w = w + dt * (theta * (load[k + 1] - KA @ C[k + 1])
                      + (1 - theta) * (load[k] - KA @ C[k]))
    U = C @ Z.T + zs
    traj = Trajectory(times=times, u=U, lam=np.zeros((N + 1, sys.m)), scheme=scheme, dt=dt)
    rule = "right" if theta == 1.0 else "trapezoid"
    traj.lam = recover_multiplier(sys, traj, rule=rule)
    return traj


# ---------------------------------------------------------------- energy estimate

@dataclass
class EnergyReport:
    lhs: float
    rhs_data: float
    empirical_C: float
    norm_u: float
    norm_lambda: float
    norm_f: float
    norm_g: float
    norm_u0: float

    def to_dict(self):
        return asdict(self)


def _dual_sq(factor, vecs):
    if vecs.shape[1] == 0:
        return np.zeros(len(vecs))
    sol = factor.solve(vecs.T).T if len(vecs) else vecs
    return np.maximum(np.einsum("ti,ti->t", vecs, sol), 0.0)


def energy_report(sys, traj):
    """Both sides of ||u||_{L2(X)} + ||lam||_{L2(M)} <= C (||f||_{L2(X')}
    + ||g||_{H1(M')} + ||u0||_Y), with trapezoidal time quadrature."""
    t = traj.times
    nu = math.sqrt(trapezoid(traj.u_norms(sys.Mx) ** 2, t))
    nl = math.sqrt(trapezoid(traj.lam_norms(sys.Mm) ** 2, t))
    F = np.array([np.asarray(sys.f(s), dtype=float) for s in t])
    nf = math.sqrt(trapezoid(_dual_sq(sys.Mx_factor, F), t))
    if sys.m:
        G = np.array([np.asarray(sys.g(s), dtype=float) for s in t]).reshape(len(t), sys.m)
        Gd = np.array([np.asarray(sys.gdot(s), dtype=float) for s in t]).reshape(len(t), sys.m)
        ng = math.sqrt(trapezoid(_dual_sq(sys.Mm_factor, G) + _dual_sq(sys.Mm_factor, Gd), t))
    else:
        ng = 0.0
    nu0 = math.sqrt(max(sys.u0 @ (sys.My @ sys.u0), 0.0))
    lhs = nu + nl
    rhs = nf + ng + nu0
    C = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return EnergyReport(lhs=lhs, rhs_data=rhs, empirical_C=C, norm_u=nu, norm_lambda=nl,
                        norm_f=nf, norm_g=ng, norm_u0=nu0)


def zero_data(sys):
    """Copy of `sys` with f = 0, g = 0 and u0 = 0."""
    return sys.replace(f=_zero_load(sys.n), g=_zero_load(sys.m), gdot=_zero_load(sys.m),
                       u0=np.zeros(sys.n))


def l2_time_distance(traj_a, traj_b, gram):
    """L2(0,T; gram) distance between two trajectories on the coarser grid."""
    ta, tb = traj_a.times, traj_b.times
    if len(ta) > len(tb):
        traj_a, traj_b = traj_b, traj_a
        ta, tb = tb, ta
    ratio = (len(tb) - 1) // (len(ta) - 1)
    if (len(ta) - 1) * ratio != len(tb) - 1:
        raise ValueError("time grids are not nested")
    diff = traj_a.u - traj_b.u[::ratio]
    sq = np.einsum("ti,ti->t", diff, (gram @ diff.T).T)
    return math.sqrt(max(trapezoid(np.maximum(sq, 0.0), ta), 0.0))
