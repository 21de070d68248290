import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import built
from degen_mixed import dae, problems


def const(v):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return lambda t: v.copy()


def system(R, A, B, f=None, g=None, gdot=None, u0=None, Mx=None, My=None, Mm=None, T=1.0,
           **kw):
    R, A, B = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (R, A, B))
    n = A.shape[0]
    B = B.reshape(-1, n)
    m = B.shape[0]
    return dae.DiscreteMixedSystem(
        R=R, A=A, B=B, Mx=np.eye(n) if Mx is None else Mx, My=np.eye(n) if My is None else My,
        Mm=np.eye(m) if Mm is None else Mm, f=f or const(np.zeros(n)),
        g=g or const(np.zeros(m)), gdot=gdot or const(np.zeros(m)),
        u0=np.zeros(n) if u0 is None else np.asarray(u0, dtype=float), T=T, **kw)


def scalar_decay(T=1.0):
    return system([[1.0]], [[1.0]], np.zeros((0, 1)), u0=[1.0], T=T)


def degenerate_2x2():
    return system(np.diag([1.0, 0.0]), np.eye(2), [[0.0, 1.0]], g=lambda t: np.array([t]),
                  gdot=const([1.0]), u0=[1.0, 0.0])


def synthetic(seed, n=8, m=2, rd=2, **params):
    return built("synthetic-random", seed=seed, n=n, m=m, rank_deficiency=rd, **params)


# ---------------------------------------------------------------- construction

def test_system_validation():
    with pytest.raises(ValueError):
        system(np.eye(2), np.eye(3), np.zeros((0, 3)))
    with pytest.raises(ValueError):
        system([[1.0]], [[1.0]], np.zeros((0, 1)), T=0.0)
    with pytest.raises(Exception):
        system([[np.nan]], [[1.0]], np.zeros((0, 1)))


# ---------------------------------------------------------------- hypotheses

def test_inf_sup_examples():
    assert dae.inf_sup_constant(system(np.eye(2), np.eye(2), [[1.0, 0.0]])) == pytest.approx(1.0)
    assert dae.inf_sup_constant(system(np.eye(2), np.eye(2), [[2.0, 0.0]])) == pytest.approx(2.0)
    with pytest.raises(dae.RankDeficientB):
        dae.inf_sup_constant(system(np.eye(2), np.eye(2), [[1.0, 0.0], [2.0, 0.0]]))


def test_inf_sup_row_rescaling_invariance():
    sys_ = synthetic(3)
    D = np.diag([3.0, 0.25])
    other = sys_.replace(B=D @ sys_.B, Mm=D @ sys_.Mm @ D)
    assert dae.inf_sup_constant(other) == pytest.approx(dae.inf_sup_constant(sys_), rel=1e-10)


def test_inf_sup_matches_oracles():
    sys_ = synthetic(5)
    beta = dae.inf_sup_constant(sys_)
    assert beta == pytest.approx(oracles.inf_sup_by_pencil(sys_.B, sys_.Mx, sys_.Mm), rel=1e-10)
    assert beta == pytest.approx(oracles.inf_sup_by_sup(sys_.B, sys_.Mx, sys_.Mm), rel=1e-10)


def test_stokes_inf_sup_mesh_stable():
    betas = [dae.inf_sup_constant(built("stokes-mms", k)) for k in (4, 8, 16)]
    assert min(betas) > 0.1
    assert all(abs(b - betas[0]) <= 0.1 * betas[0] for b in betas)
    s4 = built("stokes-mms", 4)
    assert betas[0] == pytest.approx(oracles.inf_sup_by_sup(s4.B, s4.Mx, s4.Mm), rel=1e-9)


def test_garding_examples():
    s = system(np.zeros((2, 2)), np.eye(2), np.zeros((0, 2)))
    assert dae.garding_constants(s) == (0.0, pytest.approx(1.0))
    s = system(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), np.zeros((0, 2)))
    assert dae.garding_constants(s, [1.0]) == (1.0, pytest.approx(1.0))
    with pytest.raises(dae.NoPositiveAlpha):
        dae.garding_constants(s, [0.0])
    with pytest.raises(dae.EmptyKernelGrid):
        dae.garding_constants(s, [])


def test_garding_against_oracle():
    sys_ = synthetic(11)
    for gamma, alpha in dae.garding_curve(sys_):
        ref = oracles.garding_alpha(sys_, gamma)
        if ref > 0:
            assert alpha == pytest.approx(ref, rel=1e-9)
        else:
            assert alpha == 0.0


@pytest.mark.parametrize("nu", [1.0, 0.1])
def test_stokes_garding_gamma_zero_alpha_nu(nu):
    sys_ = built("stokes-mms", 4, nu=nu)
    gamma, alpha = dae.garding_constants(sys_)
    assert gamma == 0.0
    assert nu * (1 - 1e-10) <= alpha <= 1.05 * nu


def test_certify_stokes_and_eddy(stokes8, eddy8):
    c = dae.certify(stokes8)
    assert c.passed and c.gamma == 0.0 and c.kernel_dim > 0
    c = dae.certify(eddy8)
    assert c.passed and c.gamma > 0 and c.alpha > 0
    assert c.monotonicity_margin >= -1e-10


def test_certify_failures():
    s = system(np.eye(2), np.eye(2), [[0.0, 0.0]])
    assert not dae.certify(s).verdict["H1"]
    s = system(np.eye(2), np.eye(2), [[1.0, 0.0]], u0=[0.0, 1.0])
    assert dae.certify(s).passed
    assert not dae.certify(s.replace(u0=np.array([1.0, 1.0]))).verdict["H5"]
    assert not dae.certify(s.replace(g_regular=False)).verdict["H6"]
    bad = s.replace(g=lambda t: np.array([t ** 2]), gdot=const([1.0]))
    assert not dae.certify(bad).verdict["H6"]
    assert not dae.certify(s.replace(R=-np.eye(2))).verdict["H2"]
    s3 = system(np.eye(3), np.array([[1.0, 0, 0], [0, 1, 0.5], [0, 0, 1]]), [[1.0, 0, 0]])
    assert not dae.certify(s3).verdict["H3"]
    assert not dae.certify(s.replace(A=-np.eye(2), R=np.zeros((2, 2)))).verdict["H4"]


def test_kernel_distance():
    s = system(np.eye(2), np.eye(2), [[1.0, 0.0]])
    assert dae.kernel_distance(s, np.array([0.0, 5.0])) <= 1e-15
    assert dae.kernel_distance(s, np.array([3.0, 4.0])) == pytest.approx(3 / 5)


# ---------------------------------------------------------------- lift

def test_lift_examples():
    s = system(np.eye(2), np.eye(2), [[1.0, 0.0]], g=const([3.0]))
    assert np.allclose(dae.lift_vperp(s, 0.0), [3.0, 0.0])
    s = system(np.eye(2), np.eye(2), [[1.0, 1.0]], g=const([2.0]))
    assert np.allclose(dae.lift_vperp(s, 0.0), [1.0, 1.0])


@pytest.mark.parametrize("seed", range(5))
def test_lift_random(seed):
    sys_ = synthetic(seed)
    t = 0.3
    z = dae.lift_vperp(sys_, t)
    g = sys_.g(t)
    assert np.abs(sys_.B @ z - g).max() <= 1e-10
    assert np.abs(sys_.kernel_basis.T @ sys_.Mx @ z).max() <= 1e-10
    assert np.allclose(z, oracles.min_norm_lift(sys_.B, sys_.Mx, g), atol=1e-10)
    zn = math.sqrt(z @ sys_.Mx @ z)
    gn = math.sqrt(g @ np.linalg.solve(sys_.Mm, g))
    assert zn <= gn / dae.inf_sup_constant(sys_) * (1 + 1e-10)


# ---------------------------------------------------------------- time stepping

def test_scalar_backward_euler_closed_form():
    tr = dae.integrate(scalar_decay(), 0.1)
    n = np.arange(11)
    assert np.allclose(tr.u[:, 0], 1.1 ** -n.astype(float), rtol=1e-14)


def test_scalar_crank_nicolson_closed_form():
    tr = dae.integrate(scalar_decay(), 0.1, "crank-nicolson")
    assert np.allclose(tr.u[:, 0], (0.95 / 1.05) ** np.arange(11), rtol=1e-13)


def test_degenerate_2x2_constraint_and_oracle():
    s = degenerate_2x2()
    tr = dae.integrate(s, 0.1)
    assert np.allclose(tr.u[1:, 1], tr.times[1:], atol=1e-15)
    U, L = oracles.elimination_backward_euler(s, 0.1)
    assert np.abs(tr.u[1:] - U[1:]).max() <= 1e-12
    assert np.abs(tr.lam[1:] - L[1:]).max() <= 1e-12
    # surviving scalar ODE u1' + u1 = 0 by hand
    assert np.allclose(tr.u[:, 0], 1.1 ** -np.arange(11.0), rtol=1e-13)
    assert np.all(tr.lam[0] == 0.0)
    red = dae.integrate_reduced(s, 0.1)
    assert np.abs(red.u - tr.u).max() <= 1e-10


def test_zero_constraint_reduced_is_kernel_solve():
    sys_ = synthetic(21, zero_g=True)
    a = dae.integrate(sys_, 1 / 16)
    b = dae.integrate_reduced(sys_, 1 / 16)
    assert np.abs(a.u[1:] - b.u[1:]).max() <= 1e-10
    assert np.abs(sys_.B @ b.u.T).max() <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(dae.SCHEMES))
def test_feasibility_and_initial_multiplier(seed, scheme):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 13))
    m = int(rng.integers(1, min(4, n - 1) + 1))
    rd = int(rng.integers(1, n - m + 1)) if n - m > 1 else 1
    sys_ = problems.build(problems.ProblemRecipe(
        "synthetic-random", {"n": n, "m": m, "rank_deficiency": min(rd, n - 1)}, seed=seed))
    tr = dae.integrate(sys_, 1 / 16, scheme)
    res, g = tr.constraint_residuals(sys_)
    assert np.all(res[1:] <= 1e-10 * (1 + g[1:]))
    assert np.all(tr.lam[0] == 0.0)
    assert np.all(dae.recover_multiplier(sys_, tr)[0] == 0.0)


def test_step_condition():
    s = system([[1.0]], [[-1.0]], np.zeros((0, 1)), u0=[1.0])
    cert = dae.certify(s)
    assert cert.gamma == 10.0
    with pytest.raises(dae.StepMatrixSingular, match="dt\\*gamma"):
        dae.integrate(s, 0.1)
    dae.integrate(s, 0.05)


def test_integrate_refuses_uncertified():
    with pytest.raises(dae.CertificationFailed) as exc:
        dae.integrate(system(np.eye(2), np.eye(2), [[0.0, 0.0]]), 0.1)
    assert "H1" in str(exc.value)


def test_time_grid():
    with pytest.raises(ValueError):
        dae.time_grid(1.0, 0.3)
    t, dt = dae.time_grid(1.0, 0.25)
    assert dt == 0.25 and len(t) == 5


@pytest.mark.parametrize("scheme,factor,tol", [("backward-euler", 2.0, 0.15),
                                               ("crank-nicolson", 4.0, 0.20)])
def test_scheme_order(scheme, factor, tol):
    ratios = []
    for seed in range(5):
        sys_ = synthetic(100 + seed)
        tr = [dae.integrate(sys_, dt, scheme) for dt in (1 / 20, 1 / 40, 1 / 80)]
        d1 = dae.l2_time_distance(tr[0], tr[1], sys_.Mx)
        d2 = dae.l2_time_distance(tr[1], tr[2], sys_.Mx)
        ratios.append(d1 / d2)
    assert all(abs(r / factor - 1) <= tol for r in ratios), ratios


def test_consistent_initial_state():
    sys_ = synthetic(4)
    u = dae.consistent_initial_state(sys_)
    assert np.abs(sys_.B @ u - sys_.g(0.0)).max() <= 1e-12
    Z = sys_.kernel_basis
    assert np.allclose(Z.T @ sys_.R @ u, Z.T @ sys_.R @ sys_.u0, atol=1e-10)


# ---------------------------------------------------------------- multiplier recovery

def test_recovery_right_rule_is_exact_for_backward_euler():
    sys_ = synthetic(8)
    tr = dae.integrate(sys_, 1 / 32)
    lam = dae.recover_multiplier(sys_, tr, rule="right")
    assert np.abs(lam - tr.lam).max() <= 1e-10 * max(1.0, np.abs(tr.lam).max())


def test_recovery_left_rule_first_order():
    sys_ = synthetic(9)
    errs = []
    for dt in (1 / 20, 1 / 40, 1 / 80):
        tr = dae.integrate(sys_, dt)
        d = dae.recover_multiplier(sys_, tr) - tr.lam
        errs.append(np.sqrt(np.einsum("ti,ij,tj->t", d, sys_.Mm, d)).max())
    assert 1.7 <= errs[0] / errs[1] <= 2.3 and 1.7 <= errs[1] / errs[2] <= 2.3


def test_recovery_rejects_unknown_rule():
    sys_ = synthetic(8)
    with pytest.raises(ValueError):
        dae.recover_multiplier(sys_, dae.integrate(sys_, 0.25), rule="midpoint")


# ---------------------------------------------------------------- energy

def test_zero_data_energy():
    sys_ = dae.zero_data(synthetic(12))
    tr = dae.integrate(sys_, 0.1)
    assert np.all(tr.u == 0) and np.all(tr.lam == 0)
    rep = dae.energy_report(sys_, tr)
    assert rep.lhs == 0.0 and rep.rhs_data == 0.0


def test_energy_scalar_decay_stable_under_dt_halving():
    cs = [dae.energy_report(s := scalar_decay(), dae.integrate(s, dt)).empirical_C
          for dt in (0.1, 0.05)]
    assert all(math.isfinite(c) and c > 0 for c in cs)
    assert abs(cs[1] / cs[0] - 1) <= 0.2


def test_energy_linear_in_forcing():
    sys_ = synthetic(13, zero_u0=True, zero_g=True)
    f = sys_.f
    doubled = sys_.replace(f=lambda t: 2 * f(t))
    a = dae.energy_report(sys_, dae.integrate(sys_, 0.05))
    b = dae.energy_report(doubled, dae.integrate(doubled, 0.05))
    assert b.lhs == pytest.approx(2 * a.lhs, rel=1e-10)
    assert b.empirical_C == pytest.approx(a.empirical_C, rel=1e-10)
    d = a.to_dict()
    assert all(d[k] >= 0 for k in ("lhs", "rhs_data", "norm_f", "norm_g", "norm_u0"))


def test_l2_time_distance_needs_nested_grids():
    s = scalar_decay()
    with pytest.raises(ValueError):
        dae.l2_time_distance(dae.integrate(s, 0.25), dae.integrate(s, 0.1), np.eye(1))
