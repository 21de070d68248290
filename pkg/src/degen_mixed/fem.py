"""Finite-element spaces and assembly on structured triangulations.

Supported spaces: continuous P1, continuous vector P2 (Taylor-Hood velocity)
and lowest-order edge elements (Whitney 1-forms) with scalar curl. Every
space keeps a full numbering and a reduced numbering related by a sparse
prolongation ``P`` (full = P @ reduced), which encodes Dirichlet elimination,
grouped interface constants and the zero-mean pressure deflation.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .mesh import CONDUCTOR, INSULATOR
from .quadrature import line_rule, triangle_rule

ASSEMBLY_DEGREE = 4
ERROR_DEGREE = 6


class EmptyConductor(ValueError):
    pass


class DisconnectedInsulator(ValueError):
    pass


@dataclass(eq=False)
class FeSpace:
    kind: str            # "P1", "P2-vector" or "edge"
    mesh: object
    P: sp.csr_matrix     # prolongation, shape (n_full, ndof)
    pick: np.ndarray     # representative full dof of each reduced dof
    info: dict = field(default_factory=dict)

    @property
    def n_full(self):
        return self.P.shape[0]

    @property
    def ndof(self):
        return self.P.shape[1]

    def expand(self, coeffs):
        return self.P @ np.asarray(coeffs, dtype=float)

    def reduce(self, K):
        """Galerkin restriction P^T K P of a full operator."""
        return (self.P.T @ K @ self.P).tocsr()


def _selection(n_full, keep):
    keep = np.asarray(keep)
    P = sp.csr_matrix((np.ones(keep.size), (keep, np.arange(keep.size))),
                      shape=(n_full, keep.size))
    return P


def _per_triangle(mesh, coefficient):
    """Coefficient as a per-triangle array; dicts map region tag -> value."""
    if isinstance(coefficient, dict):
        c = np.zeros(mesh.nt)
        for tag, value in coefficient.items():
            c[mesh.region == tag] = value
        return c
    c = np.asarray(coefficient, dtype=float)
    if c.ndim == 0:
        return np.full(mesh.nt, float(c))
    return c


def _scatter(rows_local, cols_local, blocks, shape):
    """Sum local element matrices (nt, a, b) into a CSR matrix."""
    nt, a, b = blocks.shape
    r = np.repeat(rows_local, b, axis=1).reshape(nt, a, b)
    c = np.tile(cols_local, (1, a)).reshape(nt, a, b)
    return sp.coo_matrix((blocks.ravel(), (r.ravel(), c.ravel())), shape=shape).tocsr()


def _scatter_vec(rows_local, blocks, n):
    return np.bincount(rows_local.ravel(), weights=blocks.ravel(), minlength=n)


# ---------------------------------------------------------------- P1

def assemble_p1_mass(mesh, coefficient=1.0):
    area, _ = mesh.geometry()
    c = _per_triangle(mesh, coefficient)
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    blocks = (c * area)[:, None, None] * ref
    return _scatter(mesh.triangles, mesh.triangles, blocks, (mesh.nv, mesh.nv))


def assemble_p1_stiffness(mesh, coefficient=1.0):
    area, grads = mesh.geometry()
    c = _per_triangle(mesh, coefficient)
    blocks = (c * area)[:, None, None] * np.einsum("tid,tjd->tij", grads, grads)
    return _scatter(mesh.triangles, mesh.triangles, blocks, (mesh.nv, mesh.nv))


def p1_load(mesh, fn, degree=ASSEMBLY_DEGREE):
    """Load vector int fn * psi_i over all vertices."""
    bary, w = triangle_rule(degree)
    area, _ = mesh.geometry()
    x = mesh.map_points(bary)
    vals = fn(x[..., 0], x[..., 1])
    blocks = area[:, None] * np.einsum("tq,q,qi->ti", vals, w, bary)
    return _scatter_vec(mesh.triangles, blocks, mesh.nv)


def p1_space(mesh, free=None):
    if free is None:
        free = np.arange(mesh.nv)
    P = _selection(mesh.nv, free)
    return FeSpace("P1", mesh, P, np.asarray(free))


# ---------------------------------------------------------------- P2

def _p2_basis(bary):
    """Values (q, 6) and barycentric derivatives (q, 6, 3) of the P2 basis.

    Local nodes: vertices 0, 1, 2 then midpoints of edges 01, 12, 02.
    """
    L = bary
    q = len(L)
    vals = np.empty((q, 6))
    d = np.zeros((q, 6, 3))
    for i in range(3):
        vals[:, i] = L[:, i] * (2 * L[:, i] - 1)
        d[:, i, i] = 4 * L[:, i] - 1
    for m, (i, j) in enumerate([(0, 1), (1, 2), (0, 2)]):
        vals[:, 3 + m] = 4 * L[:, i] * L[:, j]
        d[:, 3 + m, i] = 4 * L[:, j]
        d[:, 3 + m, j] = 4 * L[:, i]
    return vals, d


def p2_nodes(mesh):
    """Global P2 node numbers per triangle (nt, 6) and node coordinates."""
    dofs = np.hstack([mesh.triangles, mesh.nv + mesh.tri_edges])
    mid = mesh.vertices[mesh.edges].mean(axis=1)
    coords = np.vstack([mesh.vertices, mid])
    return dofs, coords


def _p2_tables(mesh, degree):
    bary, w = triangle_rule(degree)
    vals, dval = _p2_basis(bary)
    _, grads = mesh.geometry()
    pg = np.einsum("qak,tkd->tqad", dval, grads)
    return bary, w, vals, pg


def assemble_p2_mass(mesh, coefficient=1.0, degree=ASSEMBLY_DEGREE):
    area, _ = mesh.geometry()
    c = _per_triangle(mesh, coefficient)
    bary, w, vals, _ = _p2_tables(mesh, degree)
    ref = np.einsum("q,qa,qb->ab", w, vals, vals)
    blocks = (c * area)[:, None, None] * ref
    dofs, _ = p2_nodes(mesh)
    n = mesh.nv + mesh.ne
    return _scatter(dofs, dofs, blocks, (n, n))


def assemble_p2_stiffness(mesh, coefficient=1.0, degree=ASSEMBLY_DEGREE):
    area, _ = mesh.geometry()
    c = _per_triangle(mesh, coefficient)
    bary, w, vals, pg = _p2_tables(mesh, degree)
    blocks = (c * area)[:, None, None] * np.einsum("q,tqad,tqbd->tab", w, pg, pg)
    dofs, _ = p2_nodes(mesh)
    n = mesh.nv + mesh.ne
    return _scatter(dofs, dofs, blocks, (n, n))


def p2_vector_load(mesh, fn, degree=ASSEMBLY_DEGREE):
    """Load vector int f . phi_i; fn(x, y) returns (..., 2). Full vector layout."""
    area, _ = mesh.geometry()
    bary, w, vals, _ = _p2_tables(mesh, degree)
    x = mesh.map_points(bary)
    F = fn(x[..., 0], x[..., 1])
    dofs, _ = p2_nodes(mesh)
    n = mesh.nv + mesh.ne
    out = np.empty(2 * n)
    for comp in range(2):
        blocks = area[:, None] * np.einsum("tq,q,qa->ta", F[..., comp], w, vals)
        out[comp * n:(comp + 1) * n] = _scatter_vec(dofs, blocks, n)
    return out


def p2_vector_space(mesh):
    """Vector P2 with homogeneous Dirichlet dofs eliminated on the boundary."""
    n = mesh.nv + mesh.ne
    bnd = np.concatenate([mesh.boundary_vertex, mesh.boundary_edge])
    free_nodes = np.flatnonzero(~bnd)
    free = np.concatenate([free_nodes, n + free_nodes])
    return FeSpace("P2-vector", mesh, _selection(2 * n, free), free,
                   info={"n_nodes": n})


def assemble_divergence(mesh, degree=ASSEMBLY_DEGREE):
    """Full matrix of -int psi_i div(phi_j): P1 rows, vector-P2 columns."""
    area, _ = mesh.geometry()
    bary, w, vals, pg = _p2_tables(mesh, degree)
    dofs, _ = p2_nodes(mesh)
    n = mesh.nv + mesh.ne
    blocks = []
    cols = []
    for comp in range(2):
        blk = -area[:, None, None] * np.einsum("q,qi,tqa->tia", w, bary, pg[..., comp])
        blocks.append(blk)
        cols.append(dofs + comp * n)
    blocks = np.concatenate(blocks, axis=2)
    cols = np.concatenate(cols, axis=1)
    return _scatter(mesh.triangles, cols, blocks, (mesh.nv, 2 * n))


# ---------------------------------------------------------------- edge elements

_LOCAL_EDGES = np.array([[0, 1], [1, 2], [0, 2]])


def _edge_local(mesh):
    """Local vertex pair (start, end) of each local edge, oriented low -> high
    global vertex index, as arrays (nt, 3)."""
    tv = mesh.triangles
    a = tv[:, _LOCAL_EDGES[:, 0]]
    b = tv[:, _LOCAL_EDGES[:, 1]]
    flip = a > b
    la = np.where(flip, _LOCAL_EDGES[:, 1], _LOCAL_EDGES[:, 0])
    lb = np.where(flip, _LOCAL_EDGES[:, 0], _LOCAL_EDGES[:, 1])
    return la, lb


def _edge_curls(mesh):
    """Scalar curl of each local Whitney function, (nt, 3): 2 grad la x grad lb."""
    _, grads = mesh.geometry()
    la, lb = _edge_local(mesh)
    t = np.arange(mesh.nt)[:, None]
    ga = grads[t, la]
    gb = grads[t, lb]
    return 2.0 * (ga[..., 0] * gb[..., 1] - ga[..., 1] * gb[..., 0])


def _edge_values(mesh, bary):
    """Whitney basis values (nt, q, 3, 2) at barycentric points."""
    _, grads = mesh.geometry()
    la, lb = _edge_local(mesh)
    t = np.arange(mesh.nt)[:, None]
    ga = grads[t, la]                  # (nt, 3, 2)
    gb = grads[t, lb]
    La = bary[:, la].transpose(1, 0, 2)  # (nt, q, 3)
    Lb = bary[:, lb].transpose(1, 0, 2)
    return La[..., None] * gb[:, None] - Lb[..., None] * ga[:, None]


def assemble_edge_mass(mesh, coefficient=1.0):
    area, grads = mesh.geometry()
    c = _per_triangle(mesh, coefficient)
    la, lb = _edge_local(mesh)
    t = np.arange(mesh.nt)[:, None]
    ga = grads[t, la]
    gb = grads[t, lb]
    Mref = (np.ones((3, 3)) + np.eye(3)) / 12.0

    def m(i, j):
        return Mref[i[:, :, None], j[:, None, :]]

    def dot(u, v):
        return np.einsum("tid,tjd->tij", u, v)

    blocks = (m(la, la) * dot(gb, gb) - m(la, lb) * dot(gb, ga)
              - m(lb, la) * dot(ga, gb) + m(lb, lb) * dot(ga, ga))
    blocks *= (c * area)[:, None, None]
    return _scatter(mesh.tri_edges, mesh.tri_edges, blocks, (mesh.ne, mesh.ne))


def assemble_curlcurl(mesh, coefficient=1.0):
    area, _ = mesh.geometry()
    c = _per_triangle(mesh, coefficient)
    cu = _edge_curls(mesh)
    blocks = (c * area)[:, None, None] * cu[:, :, None] * cu[:, None, :]
    return _scatter(mesh.tri_edges, mesh.tri_edges, blocks, (mesh.ne, mesh.ne))


def edge_gradient(mesh):
    """Discrete gradient (ne, nv): circulation of grad(psi_v) along each edge."""
    ne = mesh.ne
    rows = np.repeat(np.arange(ne), 2)
    cols = mesh.edges.ravel()
    vals = np.tile([-1.0, 1.0], ne)
    return sp.csr_matrix((vals, (rows, cols)), shape=(ne, mesh.nv))


def edge_load(mesh, fn, coefficient=1.0, degree=ASSEMBLY_DEGREE):
    """Load vector int c F . phi_e for a vector field fn(x, y) -> (..., 2)."""
    area, _ = mesh.geometry()
    area = area * _per_triangle(mesh, coefficient)
    bary, w = triangle_rule(degree)
    x = mesh.map_points(bary)
    F = fn(x[..., 0], x[..., 1])
    phi = _edge_values(mesh, bary)
    blocks = area[:, None] * np.einsum("q,tqd,tqed->te", w, F, phi)
    return _scatter_vec(mesh.tri_edges, blocks, mesh.ne)


def edge_load_curl(mesh, fn, degree=ASSEMBLY_DEGREE):
    """Load vector int H curl(phi_e) for a scalar field fn(x, y).

    For tangential-trace-free test functions this equals int rot(H) . phi_e.
    """
    area, _ = mesh.geometry()
    bary, w = triangle_rule(degree)
    x = mesh.map_points(bary)
    integral = area * np.einsum("tq,q->t", fn(x[..., 0], x[..., 1]), w)
    blocks = integral[:, None] * _edge_curls(mesh)
    return _scatter_vec(mesh.tri_edges, blocks, mesh.ne)


def edge_space(mesh):
    """Edge elements with tangential trace eliminated on the boundary."""
    free = np.flatnonzero(~mesh.boundary_edge)
    return FeSpace("edge", mesh, _selection(mesh.ne, free), free)


def assemble_insulator_coupling(mesh, eps):
    """Full (nv, ne) matrix of int_{insulator} eps phi_e . grad psi_v."""
    area, grads = mesh.geometry()
    c = _per_triangle(mesh, {INSULATOR: eps})
    la, lb = _edge_local(mesh)
    t = np.arange(mesh.nt)[:, None]
    mean_phi = (grads[t, lb] - grads[t, la]) / 3.0          # (nt, 3, 2), times area
    blocks = (c * area)[:, None, None] * np.einsum("tvd,ted->tve", grads, mean_phi)
    return _scatter(mesh.triangles, mesh.tri_edges, blocks, (mesh.nv, mesh.ne))


# ---------------------------------------------------------------- interpolation & norms

def interpolate(space, fn, full=False):
    """Interpolate a callback into `space`.

    P1: nodal values of fn(x, y). P2-vector: nodal values of fn(x, y) -> (..., 2).
    edge: tangential circulations of fn along each edge. Returns reduced
    coefficients unless ``full``.
    """
    mesh = space.mesh
    if space.kind == "P1":
        v = fn(mesh.vertices[:, 0], mesh.vertices[:, 1])
    elif space.kind == "P2-vector":
        _, coords = p2_nodes(mesh)
        F = fn(coords[:, 0], coords[:, 1])
        v = np.concatenate([F[:, 0], F[:, 1]])
    elif space.kind == "edge":
        s, w = line_rule(4)
        a = mesh.vertices[mesh.edges[:, 0]]
        b = mesh.vertices[mesh.edges[:, 1]]
        x = a[:, None] + s[None, :, None] * (b - a)[:, None]
        F = fn(x[..., 0], x[..., 1])
        v = np.einsum("eqd,q,ed->e", F, w, b - a)
    else:
        raise ValueError(space.kind)
    v = np.asarray(v, dtype=float)
    return v if full else v[space.pick]


def evaluate(space, coeffs, degree=ERROR_DEGREE):
    """Field values and first derivatives at the quadrature points.

    Returns (points (nt, q, 2), weights (q,), values, derivative) where the
    derivative is the gradient (P1, P2-vector: d[comp, dir]) or the curl (edge).
    """
    mesh = space.mesh
    u = space.expand(coeffs)
    bary, w = triangle_rule(degree)
    x = mesh.map_points(bary)
    _, grads = mesh.geometry()
    if space.kind == "P1":
        vals = np.einsum("qi,ti->tq", bary, u[mesh.triangles])
        d = np.einsum("tid,ti->td", grads, u[mesh.triangles])
        d = np.broadcast_to(d[:, None, :], vals.shape + (2,))
    elif space.kind == "P2-vector":
        v6, dv = _p2_basis(bary)
        pg = np.einsum("qak,tkd->tqad", dv, grads)
        dofs, _ = p2_nodes(mesh)
        n = space.info["n_nodes"]
        vals = np.empty((mesh.nt, len(w), 2))
        d = np.empty((mesh.nt, len(w), 2, 2))
        for comp in range(2):
            c = u[comp * n + dofs]
            vals[..., comp] = np.einsum("qa,ta->tq", v6, c)
            d[..., comp, :] = np.einsum("tqad,ta->tqd", pg, c)
    elif space.kind == "edge":
        phi = _edge_values(mesh, bary)
        c = u[mesh.tri_edges]
        vals = np.einsum("tqed,te->tqd", phi, c)
        cu = np.einsum("te,te->t", _edge_curls(mesh), c)
        d = np.broadcast_to(cu[:, None], vals.shape[:2])
    else:
        raise ValueError(space.kind)
    return x, w, vals, d


def error_norm(space, coeffs, exact, kind="L2", exact_deriv=None, degree=ERROR_DEGREE):
    """Norm of (discrete - exact) with a degree-6 rule.

    kind: "L2", "H1semi", "H1" (P1, P2-vector; needs exact gradient) or
    "curl", "Hcurl" (edge; needs exact scalar curl).
    """
    x, w, vals, d = evaluate(space, coeffs, degree)
    area, _ = space.mesh.geometry()
    X, Y = x[..., 0], x[..., 1]
    total = 0.0
    if kind in ("L2", "H1", "Hcurl"):
        e = vals - exact(X, Y)
        e2 = e ** 2
        if e2.ndim == 3:
            e2 = e2.sum(axis=-1)
        total += np.einsum("t,q,tq->", area, w, e2)
    if kind in ("H1semi", "H1", "curl", "Hcurl"):
        if exact_deriv is None:
            raise ValueError(f"{kind} error needs exact_deriv")
        e = d - exact_deriv(X, Y)
        e2 = e ** 2
        while e2.ndim > 2:
            e2 = e2.sum(axis=-1)
        total += np.einsum("t,q,tq->", area, w, e2)
    return float(np.sqrt(total))


def norm(gram, coeffs):
    """Energy norm sqrt(c^T G c)."""
    c = np.asarray(coeffs, dtype=float)
    return float(np.sqrt(max(c @ (gram @ c), 0.0)))


# ---------------------------------------------------------------- problem assemblies

@dataclass(eq=False)
class StokesAssembly:
    mesh: object
    nu: float
    velocity: FeSpace
    pressure: FeSpace
    A: sp.csr_matrix       # nu * vector stiffness, free dofs
    My: sp.csr_matrix      # vector mass
    Mx: sp.csr_matrix      # vector stiffness (H^1_0 inner product)
    B: sp.csr_matrix       # deflated pressure x free velocity
    Mm: sp.csr_matrix      # deflated pressure mass
    full: dict = field(default_factory=dict, repr=False)


def pressure_deflation(Mp):
    """Basis of the mass-orthogonal complement of constants: e_i - (m_i/m_N) e_N."""
    m = np.asarray(Mp.sum(axis=1)).ravel()
    n = m.size
    rows = np.concatenate([np.arange(n - 1), np.full(n - 1, n - 1)])
    cols = np.concatenate([np.arange(n - 1), np.arange(n - 1)])
    vals = np.concatenate([np.ones(n - 1), -m[:-1] / m[-1]])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n - 1))


def assemble_stokes(mesh, nu):
    """Taylor-Hood (P2-P1) matrices of the time-dependent Stokes problem."""
    if mesh.has_conductor:
        raise ValueError("Stokes assembly expects a mesh without region tags")
    K = assemble_p2_stiffness(mesh)
    M = assemble_p2_mass(mesh)
    Kv = sp.block_diag([K, K], format="csr")
    Mv = sp.block_diag([M, M], format="csr")
    Bfull = assemble_divergence(mesh)
    Mp = assemble_p1_mass(mesh)
    Q = pressure_deflation(Mp)
    vel = p2_vector_space(mesh)
    prs = FeSpace("P1", mesh, Q, np.arange(mesh.nv - 1), info={"deflated": True})
    Mx = vel.reduce(Kv)
    return StokesAssembly(
        mesh=mesh, nu=nu, velocity=vel, pressure=prs,
        A=(nu * Mx).tocsr(), My=vel.reduce(Mv), Mx=Mx,
        B=(Q.T @ Bfull @ vel.P).tocsr(), Mm=(Q.T @ Mp @ Q).tocsr(),
        full={"K": Kv, "M": Mv, "B": Bfull, "Mp": Mp})


@dataclass(eq=False)
class EddyAssembly:
    mesh: object
    edge: FeSpace
    multiplier: FeSpace
    A: sp.csr_matrix      # (1/mu) curl-curl
    R: sp.csr_matrix      # sigma-mass on the conductor
    B: sp.csr_matrix      # int_insulator eps v . grad mu
    Mx: sp.csr_matrix     # H(curl) Gram
    My: sp.csr_matrix     # L^2 Gram
    Mm: sp.csr_matrix     # H^1 Gram on the insulator
    extension: sp.csr_matrix  # multiplier dofs -> P1 on all vertices, constant in conductor
    params: dict = field(default_factory=dict)

    def gradient_of_multiplier(self):
        """Edge coefficients (free edges x m) of grad of the extended multipliers."""
        G = edge_gradient(self.mesh)
        return (self.edge.P.T @ G @ self.extension).tocsr()


def multiplier_space(mesh):
    """P1 on the insulator, zero on the outer boundary, one dof per interface
    component (grouped constant)."""
    ins = mesh.region_vertices(INSULATOR)
    cond = mesh.region_vertices(CONDUCTOR)
    interface = ins & cond
    components = mesh.interface_components()
    free_interior = np.flatnonzero(ins & ~interface & ~mesh.boundary_vertex)
    ncol = free_interior.size + len(components)
    rows = list(free_interior)
    cols = list(range(free_interior.size))
    pick = list(free_interior)
    for c, verts in enumerate(components):
        rows += list(verts)
        cols += [free_interior.size + c] * len(verts)
        pick.append(verts[0])
    P = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(mesh.nv, ncol))
    return FeSpace("P1", mesh, P, np.array(pick),
                   info={"interface_components": components,
                         "interface_dofs": np.arange(free_interior.size, ncol)})


def _conductor_extension(mesh, space):
    """Extend multiplier functions into the conductor by their interface constant."""
    P = space.P.tolil()
    comps = space.info["interface_components"]
    first = space.info["interface_dofs"]
    cond_tris = np.flatnonzero(mesh.region == CONDUCTOR)
    te = mesh.tri_edges[cond_tris]
    # conductor vertex components via conductor-triangle adjacency
    g = sp.coo_matrix((np.ones(3 * cond_tris.size), (np.repeat(np.arange(cond_tris.size), 3),
                                            te.ravel())),
                      shape=(cond_tris.size, mesh.ne)).tocsr()
    _, labels = connected_components(g @ g.T, directed=False)
    for lab in np.unique(labels):
        verts = np.unique(mesh.triangles[cond_tris[labels == lab]])
        for c, iverts in enumerate(comps):
            if np.intersect1d(verts, iverts).size:
                for v in verts:
                    P[v, :] = 0
                    P[v, first[c]] = 1.0
                break
    return P.tocsr()


def assemble_edge2d(mesh, sigma=1.0, mu_conductor=1.0, mu_insulator=1.0,
                    eps_conductor=1.0, eps_insulator=1.0):
    """Matrices of the 2D internal-conductor eddy-current analog.

    Primal: edge elements in H_0(curl). Multiplier: P1 on the insulator with
    zero outer trace and grouped interface constants. ``sigma`` may be a
    per-triangle array (only its conductor values are used).
    """
    if not mesh.has_conductor:
        raise EmptyConductor("mesh has no conductor-tagged triangles")
    if not mesh.region_is_connected(INSULATOR):
        raise DisconnectedInsulator("insulator region must be connected")
    sig = _per_triangle(mesh, sigma)
    sig = np.where(mesh.region == CONDUCTOR, sig, 0.0)
    if np.any(sig[mesh.region == CONDUCTOR] <= 0):
        raise ValueError("sigma must be positive on the conductor")
    inv_mu = _per_triangle(mesh, {CONDUCTOR: 1.0 / mu_conductor,
                                  INSULATOR: 1.0 / mu_insulator})
    edge = edge_space(mesh)
    mult = multiplier_space(mesh)
    C1 = assemble_curlcurl(mesh)
    M1 = assemble_edge_mass(mesh)
    Kd = assemble_p1_stiffness(mesh, {INSULATOR: 1.0})
    Md = assemble_p1_mass(mesh, {INSULATOR: 1.0})
    Bfull = assemble_insulator_coupling(mesh, eps_insulator)
    return EddyAssembly(
        mesh=mesh, edge=edge, multiplier=mult,
        A=edge.reduce(assemble_curlcurl(mesh, inv_mu)),
        R=edge.reduce(assemble_edge_mass(mesh, sig)),
        B=(mult.P.T @ Bfull @ edge.P).tocsr(),
        Mx=edge.reduce(C1 + M1), My=edge.reduce(M1),
        Mm=mult.reduce(Kd + Md),
        extension=_conductor_extension(mesh, mult),
        params={"sigma": sigma, "mu_conductor": mu_conductor, "mu_insulator": mu_insulator,
                "eps_conductor": eps_conductor, "eps_insulator": eps_insulator})
