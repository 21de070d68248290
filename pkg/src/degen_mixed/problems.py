"""Named problem instances wired into :class:`DiscreteMixedSystem`.

Recipes:

* ``stokes-mms``: transient Stokes on the unit square, Taylor-Hood elements,
  manufactured divergence-free velocity. The multiplier is the time primitive
  of the pressure.
* ``stokes-nonsolenoidal``: same operators, velocity with nonzero divergence,
  so the constraint datum g(t) is nonzero.
* ``eddy2d-conductor``: 2D eddy-current analog with an internal conductor box.
  The unknown is the time primitive of the electric field.
* ``synthetic-random``: small random certified systems with singular R.
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from . import dae, fem
from . import linalg as la
from .mesh import CONDUCTOR, structured_mesh

RECIPES = ("stokes-mms", "stokes-nonsolenoidal", "eddy2d-conductor", "synthetic-random")

DEFAULTS = {
    "stokes-mms": {"nu": 1.0, "k": 8, "T": 0.5},
    "stokes-nonsolenoidal": {"nu": 1.0, "k": 8, "T": 0.5},
    "eddy2d-conductor": {"k": 8, "T": 1.0, "conductor_box": [0.25, 0.75, 0.25, 0.75],
                         "sigma": 1.0, "sigma_min": None, "mu_conductor": 1.0,
                         "mu_insulator": 1.0, "eps_conductor": 1.0, "eps_insulator": 1.0,
                         "h0_center": [0.5, 0.5], "h0_inner_radius": 0.15, "h0_radius": 0.35,
                         "h0_amplitude": 1.0,
                         "j_amplitude": 0.0, "j_frequency": 1.0},
    "synthetic-random": {"n": 10, "m": 3, "rank_deficiency": None, "T": 1.0,
                         "zero_u0": False, "zero_g": False},
}


class RecipeError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemRecipe:
    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    data_scale: float = 1.0
    zero_B_row: bool = False     # fault injection: zero the first row of B
    u0_tol: float = 1e-8

    def __post_init__(self):
        if self.name not in RECIPES:
            raise RecipeError(f"unknown recipe {self.name!r}; expected one of {RECIPES}")
        unknown = set(self.params) - set(DEFAULTS[self.name])
        if unknown:
            raise RecipeError(f"unknown parameters for {self.name}: {sorted(unknown)}")

    def get(self, key):
        return self.params.get(key, DEFAULTS[self.name][key])

    def validate(self):
        if self.name.startswith("stokes"):
            if not self.get("nu") > 0:
                raise RecipeError("nu must be positive")
        if self.name == "eddy2d-conductor":
            sigma = self.get("sigma")
            smin = self.get("sigma_min")
            if not sigma > 0 or (smin is not None and not 0 < smin <= sigma):
                raise RecipeError("need sigma_max >= sigma_min > 0 on the conductor")
            for key in ("mu_conductor", "mu_insulator", "eps_conductor", "eps_insulator"):
                if not self.get(key) > 0:
                    raise RecipeError(f"{key} must be positive")
        if self.name != "synthetic-random" and int(self.get("k")) < 2:
            raise RecipeError("mesh parameter k must be >= 2")
        if not float(self.get("T")) > 0:
            raise RecipeError("T must be positive")


# ---------------------------------------------------------------- manufactured fields

def _bump(s):
    return s ** 2 * (1 - s) ** 2


def _bump1(s):
    return 2 * s * (1 - s) * (1 - 2 * s)


def _bump2(s):
    return 2 * (1 - 6 * s + 6 * s ** 2)


def _bump3(s):
    return 12 * (2 * s - 1)


def _stack(a, b):
    return np.stack(np.broadcast_arrays(a, b), axis=-1)


class StokesMMS:
    """u* = e^-t curl(psi), psi = x^2(1-x)^2 y^2(1-y)^2; p* = e^-t (x^3 - 1/4)."""

    def __init__(self, nu=1.0):
        self.nu = nu

    @staticmethod
    def time_factor(t):
        return math.exp(-t)

    def velocity_shape(self, x, y):
        return _stack(_bump(x) * _bump1(y), -_bump1(x) * _bump(y))

    def gradient_shape(self, x, y):
        # d[..., comp, dir]
        d = np.empty(np.broadcast(x, y).shape + (2, 2))
        d[..., 0, 0] = _bump1(x) * _bump1(y)
        d[..., 0, 1] = _bump(x) * _bump2(y)
        d[..., 1, 0] = -_bump2(x) * _bump(y)
        d[..., 1, 1] = -_bump1(x) * _bump1(y)
        return d

    def pressure_shape(self, x, y):
        return x ** 3 - 0.25 + 0 * y

    def forcing_shape(self, x, y):
        # f = du/dt - nu lap u + grad p with time factor e^-t pulled out
        lap = _stack(_bump2(x) * _bump1(y) + _bump(x) * _bump3(y),
                     -(_bump3(x) * _bump(y) + _bump1(x) * _bump2(y)))
        return -self.velocity_shape(x, y) - self.nu * lap + _stack(3 * x ** 2, 0 * y)

    def divergence_shape(self, x, y):
        return 0 * x * y


class StokesNonsolenoidal(StokesMMS):
    """w* = e^-t psi (1, 1) with psi = x^2(1-x)^2 y^2(1-y)^2, same pressure as
    :class:`StokesMMS`. Zero boundary trace, nonzero divergence."""

    def velocity_shape(self, x, y):
        psi = _bump(x) * _bump(y)
        return _stack(psi, psi)

    def gradient_shape(self, x, y):
        d = np.empty(np.broadcast(x, y).shape + (2, 2))
        d[..., :, 0] = (_bump1(x) * _bump(y))[..., None]
        d[..., :, 1] = (_bump(x) * _bump1(y))[..., None]
        return d

    def forcing_shape(self, x, y):
        lap = _bump2(x) * _bump(y) + _bump(x) * _bump2(y)
        return -self.velocity_shape(x, y) - self.nu * _stack(lap, lap) + _stack(3 * x ** 2, 0 * y)

    def divergence_shape(self, x, y):
        return _bump1(x) * _bump(y) + _bump(x) * _bump1(y)


def _timed(fn, t):
    c = math.exp(-t)
    return lambda x, y: c * fn(x, y)


def stokes_mms_fields(t, nu=1.0):
    """Exact velocity, pressure and forcing at time t as callbacks of (x, y)."""
    mms = StokesMMS(nu)
    return (_timed(mms.velocity_shape, t), _timed(mms.pressure_shape, t),
            _timed(mms.forcing_shape, t))


def stokes_nonsolenoidal_fields(t, nu=1.0, mesh=None):
    """Exact velocity w*(t) and, given a mesh, the constraint datum g(t).

    g(t) is the deflated P1 load of mu -> -int mu div w*(t).
    """
    mms = StokesNonsolenoidal(nu)
    velocity = _timed(mms.velocity_shape, t)
    if mesh is None:
        return velocity, None
    Q = fem.pressure_deflation(fem.assemble_p1_mass(mesh))
    g = math.exp(-t) * (Q.T @ fem.p1_load(mesh, lambda x, y: -mms.divergence_shape(x, y)))
    return velocity, g


# ---------------------------------------------------------------- builders

def _decaying(vec, sign=1.0):
    vec = np.asarray(vec, dtype=float)
    return lambda t: sign * math.exp(-t) * vec


def _zero_first_row(B):
    B = la.as_sparse(B).tolil()
    B[0, :] = 0.0
    return B.tocsr()


def _build_stokes(recipe):
    nu = float(recipe.get("nu"))
    k = int(recipe.get("k"))
    mesh = structured_mesh(k)
    asm = fem.assemble_stokes(mesh, nu)
    exact = StokesNonsolenoidal(nu) if recipe.name == "stokes-nonsolenoidal" else StokesMMS(nu)
    P = asm.velocity.P
    Q = asm.pressure.P
    s = recipe.data_scale
    f_shape = s * (P.T @ fem.p2_vector_load(mesh, exact.forcing_shape))
    m = asm.B.shape[0]
    if recipe.name == "stokes-nonsolenoidal":
        g_shape = s * (Q.T @ fem.p1_load(mesh, lambda x, y: -exact.divergence_shape(x, y)))
        g, gdot = _decaying(g_shape), _decaying(g_shape, -1.0)
    else:
        g_shape = np.zeros(m)
        g = gdot = dae._zero_load(m)
    B = _zero_first_row(asm.B) if recipe.zero_B_row else asm.B
    # u0: Stokes projection of the exact state at t=0, so that B u0 = g(0)
    # and the discrete solution starts without a fast initial layer
    K = la.saddle_factorize(asm.A, asm.B)
    ritz = s * (P.T @ fem.p2_vector_load(
        mesh, lambda x, y: exact.forcing_shape(x, y) + exact.velocity_shape(x, y)))
    u0 = K.solve(np.concatenate([ritz, g_shape]))[:asm.A.shape[0]]
    return dae.DiscreteMixedSystem(
        R=asm.My, A=asm.A, B=B, Mx=asm.Mx, My=asm.My, Mm=asm.Mm,
        f=_decaying(f_shape), g=g, gdot=gdot, u0=u0, T=float(recipe.get("T")),
        name=recipe.name, meta={"assembly": asm, "mesh": mesh, "exact": exact})


def _smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(s, 0.0, 1.0)
    a = np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
    b = np.where(s < 1, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
    return a / (a + b)


def h0_plateau(center=(0.5, 0.5), inner=0.15, outer=0.35, amplitude=1.0):
    """`amplitude` on the disk of radius `inner`, smoothly cut off to zero at `outer`."""
    if not 0 < inner < outer:
        raise RecipeError("need 0 < inner radius < outer radius")
    cx, cy = center

    def H0(x, y):
        r = np.hypot(x - cx, y - cy)
        return amplitude * (1.0 - _smooth_step((r - inner) / (outer - inner)))
    return H0


def _conductor_sigma(mesh, smax, smin):
    """Per-triangle conductivity: constant, or varying linearly in x between
    smin and smax across the conductor."""
    sig = np.zeros(mesh.nt)
    cond = mesh.region == CONDUCTOR
    if smin is None or smin == smax:
        sig[cond] = smax
        return sig
    x0, x1 = mesh.conductor_box[:2]
    cx = mesh.vertices[mesh.triangles[cond]].mean(axis=1)[:, 0]
    sig[cond] = smin + (smax - smin) * (cx - x0) / (x1 - x0)
    return sig


def _build_eddy(recipe):
    k = int(recipe.get("k"))
    mesh = structured_mesh(k, tuple(recipe.get("conductor_box")))
    sigma = _conductor_sigma(mesh, float(recipe.get("sigma")), recipe.get("sigma_min"))
    asm = fem.assemble_edge2d(mesh, sigma=sigma,
                              mu_conductor=float(recipe.get("mu_conductor")),
                              mu_insulator=float(recipe.get("mu_insulator")),
                              eps_conductor=float(recipe.get("eps_conductor")),
                              eps_insulator=float(recipe.get("eps_insulator")))
    P = asm.edge.P
    s = recipe.data_scale
    H0 = h0_plateau(recipe.get("h0_center"), float(recipe.get("h0_inner_radius")),
                    float(recipe.get("h0_radius")), float(recipe.get("h0_amplitude")))
    f_h0 = s * (P.T @ fem.edge_load_curl(mesh, H0))
    ja = float(recipe.get("j_amplitude"))
    j_load = s * ja * (P.T @ fem.edge_load(mesh, lambda x, y: _stack(0 * x, 1 + 0 * y),
                                            coefficient={CONDUCTOR: 1.0}))
    omega = 2 * math.pi * float(recipe.get("j_frequency"))

    def f(t):
        return f_h0 - math.sin(omega * t) * j_load

    n, m = asm.A.shape[0], asm.B.shape[0]
    B = _zero_first_row(asm.B) if recipe.zero_B_row else asm.B
    return dae.DiscreteMixedSystem(
        R=asm.R, A=asm.A, B=B, Mx=asm.Mx, My=asm.My, Mm=asm.Mm,
        f=f, g=dae._zero_load(m), gdot=dae._zero_load(m), u0=np.zeros(n),
        T=float(recipe.get("T")), name=recipe.name,
        meta={"assembly": asm, "mesh": mesh, "H0": H0})


def _random_spd(rng, n, spread=0.5):
    W = rng.standard_normal((n, n))
    return np.eye(n) + spread * (W @ W.T) / n


def _degenerate_psd(rng, B, rank_deficiency):
    """PSD matrix with exactly `rank_deficiency` zero eigenvalues, nonzero
    spectrum in [0.5, 2], and a degenerate restriction to ker B when possible.

    Built blockwise on ker B and its complement so that the restriction to
    the kernel has no tiny nonzero eigenvalues (which would make the problem
    stiff rather than degenerate).
    """
    m, n = B.shape
    if m:
        _, _, Vt = np.linalg.svd(B)
        W, K = Vt[:m].T, Vt[m:].T
    else:
        W, K = np.zeros((n, 0)), np.eye(n)
    k = K.shape[1]
    zeros_kernel = min(rank_deficiency, max(k - 1, 0))
    zeros_range = rank_deficiency - zeros_kernel
    if zeros_range > m:
        raise RecipeError("rank deficiency too large for this n, m")

    def block(basis, zeros):
        d = basis.shape[1]
        Qb, _ = np.linalg.qr(rng.standard_normal((d, d))) if d else (np.zeros((0, 0)), None)
        ev = rng.uniform(0.5, 2.0, d)
        ev[:zeros] = 0.0
        return basis @ Qb @ np.diag(ev) @ Qb.T @ basis.T

    R = block(K, zeros_kernel) + block(W, zeros_range)
    return 0.5 * (R + R.T)


def sample_synthetic(rng, n, m, rank_deficiency, T=1.0, scale=1.0,
                     zero_u0=False, zero_g=False, name="synthetic-random"):
    """One random system; not necessarily certified."""
    if not 1 <= rank_deficiency < n or not 0 <= m < n:
        raise RecipeError("need 0 <= m < n and 1 <= rank_deficiency < n")
    B = rng.standard_normal((m, n))
    Mx = _random_spd(rng, n)
    My = _random_spd(rng, n)
    Mm = _random_spd(rng, m)
    R = _degenerate_psd(rng, B, rank_deficiency)
    Qo, _ = np.linalg.qr(rng.standard_normal((n, n)))
    S = Qo @ np.diag(rng.uniform(0.1, 10.0, n)) @ Qo.T
    # shift by a multiple of R so that A alone may be indefinite on the kernel
    A = S - rng.uniform(0.0, 0.5) * R
    A = 0.5 * (A + A.T)
    a1, a2 = scale * rng.standard_normal((2, n))
    w1, w2 = rng.uniform(0.5, 3.0, 2)
    b1, b2 = (np.zeros((2, m)) if zero_g else scale * rng.standard_normal((2, m)))

    def f(t):
        return a1 * math.sin(w1 * t) + a2 * math.cos(w2 * t)

    def g(t):
        return b1 * math.sin(t) + b2 * t

    def gdot(t):
        return b1 * math.cos(t) + b2

    sys = dae.DiscreteMixedSystem(R=R, A=A, B=B, Mx=Mx, My=My, Mm=Mm, f=f, g=g, gdot=gdot,
                                  u0=np.zeros(n), T=T, name=name)
    if not zero_u0:
        Z = sys.kernel_basis
        u0 = dae.lift_vperp(sys, 0.0) + Z @ (scale * rng.standard_normal(Z.shape[1]))
        sys = sys.replace(u0=u0)
    return sys


def _build_synthetic(recipe, max_tries=100):
    n = int(recipe.get("n"))
    m = int(recipe.get("m"))
    rd = recipe.get("rank_deficiency")
    rd = max(1, n // 4) if rd is None else int(rd)
    rng = np.random.default_rng(recipe.seed)
    for attempt in range(max_tries):
        sys = sample_synthetic(rng, n, m, rd, T=float(recipe.get("T")),
                               scale=recipe.data_scale, zero_u0=bool(recipe.get("zero_u0")),
                               zero_g=bool(recipe.get("zero_g")))
        cert = dae.certify(sys, u0_tol=recipe.u0_tol)
        if cert.passed:
            sys.meta.update(attempts=attempt + 1, certificate=cert)
            break
    else:
        raise dae.CertificationFailed(cert)
    if recipe.zero_B_row and m:
        sys = sys.replace(B=_zero_first_row(sys.B).toarray())
    return sys


def build(recipe, gate=True):
    """Assemble the recipe's discrete system and certify it.

    With ``gate`` the certificate must pass (raises CertificationFailed);
    either way it is stored in ``system.meta["certificate"]``.
    """
    recipe.validate()
    if recipe.name.startswith("stokes"):
        sys = _build_stokes(recipe)
    elif recipe.name == "eddy2d-conductor":
        sys = _build_eddy(recipe)
    else:
        sys = _build_synthetic(recipe)
    cert = sys.meta.get("certificate") or dae.certify(sys, u0_tol=recipe.u0_tol)
    sys.meta.update(recipe=recipe, certificate=cert)
    if gate and not cert.passed:
        raise dae.CertificationFailed(cert)
    return sys


def system_hash(sys):
    """SHA-256 of the system matrices and initial datum."""
    h = hashlib.sha256()
    for M in (sys.R, sys.A, sys.B, sys.Mx, sys.My, sys.Mm, sys.u0):
        a = np.ascontiguousarray(la.as_dense(M))
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------- post-processing

@dataclass
class PostProcess:
    times: np.ndarray               # t^n for n >= 1
    pressure: np.ndarray = None     # (N, n_vertices) full P1 coefficients
    efield: np.ndarray = None       # (N, n_free_edges)


def postprocess(sys, traj):
    """Backward differences of the time-primitive unknowns, n >= 1."""
    dt = traj.dt
    out = PostProcess(times=traj.times[1:])
    if sys.name.startswith("stokes"):
        Q = sys.meta["assembly"].pressure.P
        out.pressure = (Q @ (np.diff(traj.lam, axis=0) / dt).T).T
    elif sys.name.startswith("eddy"):
        out.efield = np.diff(traj.u, axis=0) / dt
    else:
        raise RecipeError("post-processing needs a stokes or eddy2d system")
    return out


def velocity_errors(sys, traj, kind="H1"):
    """Per-step velocity error against the manufactured solution."""
    asm, exact = sys.meta["assembly"], sys.meta["exact"]
    errs = []
    for t, u in zip(traj.times, traj.u):
        c = exact.time_factor(t)
        errs.append(fem.error_norm(asm.velocity, u,
                                   lambda x, y: c * exact.velocity_shape(x, y), kind,
                                   lambda x, y: c * exact.gradient_shape(x, y)))
    return np.array(errs)


def pressure_errors(sys, traj):
    """L2 pressure error at t^n, n >= 1, of the differenced multiplier."""
    asm, exact = sys.meta["assembly"], sys.meta["exact"]
    post = postprocess(sys, traj)
    space = fem.p1_space(asm.mesh)
    errs = []
    for t, p in zip(post.times, post.pressure):
        c = exact.time_factor(t)
        errs.append(fem.error_norm(space, p, lambda x, y: c * exact.pressure_shape(x, y)))
    return np.array(errs)


def l2_in_time(values, times):
    """sqrt(int |e(t)|^2 dt) by the trapezoidal rule."""
    return math.sqrt(trapezoid(np.asarray(values) ** 2, times))
