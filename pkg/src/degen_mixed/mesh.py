"""Structured triangulations of the unit square."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

INSULATOR = 0
CONDUCTOR = 1


class MeshError(ValueError):
    pass


class BoxNotAligned(MeshError):
    pass


class BoxTouchesBoundary(MeshError):
    pass


@dataclass(eq=False)
class Mesh:
    vertices: np.ndarray          # (nv, 2)
    triangles: np.ndarray         # (nt, 3), counter-clockwise
    edges: np.ndarray             # (ne, 2), sorted vertex pairs
    tri_edges: np.ndarray         # (nt, 3) global edge of local edges (01, 12, 02)
    boundary_vertex: np.ndarray   # (nv,) bool
    boundary_edge: np.ndarray     # (ne,) bool
    region: np.ndarray            # (nt,) INSULATOR / CONDUCTOR
    k: int = 0
    conductor_box: tuple = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def nv(self):
        return len(self.vertices)

    @property
    def nt(self):
        return len(self.triangles)

    @property
    def ne(self):
        return len(self.edges)

    @property
    def h(self):
        return 1.0 / self.k

    def geometry(self):
        """Per-triangle areas (nt,) and barycentric gradients (nt, 3, 2)."""
        if "geom" not in self._cache:
            p = self.vertices[self.triangles]
            d1 = p[:, 1] - p[:, 0]
            d2 = p[:, 2] - p[:, 0]
            det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
            area = 0.5 * det
            # gradient of lambda_i is the rotated opposite edge over 2|T|
            grads = np.empty((self.nt, 3, 2))
            for i in range(3):
                a = p[:, (i + 1) % 3]
                b = p[:, (i + 2) % 3]
                e = b - a
                grads[:, i, 0] = -e[:, 1] / det
                grads[:, i, 1] = e[:, 0] / det
            self._cache["geom"] = (area, grads)
        return self._cache["geom"]

    def signed_areas(self):
        return self.geometry()[0]

    def map_points(self, bary):
        """Physical coordinates (nt, q, 2) of barycentric points (q, 3)."""
        p = self.vertices[self.triangles]
        return np.einsum("qi,tid->tqd", bary, p)

    @property
    def has_conductor(self):
        return bool(np.any(self.region == CONDUCTOR))

    def region_vertices(self, tag):
        mask = np.zeros(self.nv, bool)
        mask[self.triangles[self.region == tag].ravel()] = True
        return mask

    def interface_edges(self):
        """Edges shared by one conductor and one insulator triangle."""
        ne = self.ne
        touches = np.zeros((ne, 2), bool)
        for tag in (INSULATOR, CONDUCTOR):
            touches[self.tri_edges[self.region == tag].ravel(), tag] = True
        return np.flatnonzero(touches.all(axis=1))

    def interface_components(self):
        """Connected components of the conductor/insulator interface.

        Returns a list of vertex-index arrays, one per component.
        """
        iface = self.interface_edges()
        if iface.size == 0:
            return []
        e = self.edges[iface]
        verts = np.unique(e)
        local = {v: i for i, v in enumerate(verts)}
        rows = [local[a] for a in e[:, 0]]
        cols = [local[b] for b in e[:, 1]]
        g = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(verts),) * 2)
        ncomp, labels = connected_components(g, directed=False)
        return [verts[labels == c] for c in range(ncomp)]

    def region_is_connected(self, tag):
        tris = np.flatnonzero(self.region == tag)
        if tris.size == 0:
            return False
        # triangles adjacent through a shared edge
        te = self.tri_edges[tris]
        rows = np.repeat(np.arange(tris.size), 3)
        g = sp.coo_matrix((np.ones(rows.size), (rows, te.ravel())),
                          shape=(tris.size, self.ne)).tocsr()
        adj = g @ g.T
        ncomp, _ = connected_components(adj, directed=False)
        return ncomp == 1

    def export(self, directory, stem="mesh"):
        """Write nodes, elements and tags as plain-text files."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        np.savetxt(directory / f"{stem}.nodes", self.vertices, fmt="%.17g",
                   header="x y")
        np.savetxt(directory / f"{stem}.elements", self.triangles, fmt="%d",
                   header="v0 v1 v2")
        np.savetxt(directory / f"{stem}.tags", self.region, fmt="%d",
                   header="region (0 insulator, 1 conductor)")


def _aligned(value, k):
    return abs(value * k - round(value * k)) <= 1e-12 * max(1, k)


def structured_mesh(k, conductor_box=None):
    """k x k squares on [0, 1]^2, each split into two triangles.

    Diagonals point towards the centre of the square so that no triangle has
    all three vertices on the boundary. ``conductor_box`` is
    ``(x0, x1, y0, y1)``, aligned with the grid and strictly interior.
    """
    if k < 2:
        raise MeshError("need k >= 2")
    if conductor_box is not None:
        x0, x1, y0, y1 = map(float, conductor_box)
        if not all(_aligned(v, k) for v in (x0, x1, y0, y1)):
            raise BoxNotAligned(f"conductor box {conductor_box} not on the 1/{k} grid")
        if not (0.0 < x0 < x1 < 1.0 and 0.0 < y0 < y1 < 1.0):
            raise BoxTouchesBoundary(f"conductor box {conductor_box} must lie strictly inside")
        conductor_box = (x0, x1, y0, y1)

    idx = np.arange((k + 1) ** 2).reshape(k + 1, k + 1)  # idx[j, i]: x = i/k, y = j/k
    xs = np.linspace(0.0, 1.0, k + 1)
    X, Y = np.meshgrid(xs, xs)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    tris = []
    half = k / 2.0
    for j in range(k):
        for i in range(k):
            a, b = idx[j, i], idx[j, i + 1]
            c, d = idx[j + 1, i + 1], idx[j + 1, i]
            if (i + 0.5 < half) == (j + 0.5 < half):
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    triangles = np.array(tris, dtype=np.int64)

    local = np.array([[0, 1], [1, 2], [0, 2]])
    all_edges = np.sort(triangles[:, local].reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(all_edges, axis=0, return_inverse=True,
                                       return_counts=True)
    tri_edges = inverse.reshape(-1, 3)
    boundary_edge = counts == 1
    boundary_vertex = np.zeros(len(vertices), bool)
    boundary_vertex[edges[boundary_edge].ravel()] = True

    region = np.full(len(triangles), INSULATOR, dtype=np.int64)
    if conductor_box is not None:
        x0, x1, y0, y1 = conductor_box
        cen = vertices[triangles].mean(axis=1)
        inside = (cen[:, 0] > x0) & (cen[:, 0] < x1) & (cen[:, 1] > y0) & (cen[:, 1] < y1)
        region[inside] = CONDUCTOR

    return Mesh(vertices=vertices, triangles=triangles, edges=edges, tri_edges=tri_edges,
                boundary_vertex=boundary_vertex, boundary_edge=boundary_edge, region=region,
                k=k, conductor_box=conductor_box)
