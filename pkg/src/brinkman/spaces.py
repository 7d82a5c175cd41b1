"""Taylor-Hood P2/P1 degree-of-freedom maps and Dirichlet data."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .mesh import INFLOW, OUTFLOW, WALL, Mesh

# local P2 node k >= 3 sits on the edge joining these local vertices
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


class Scenario(str, Enum):
    PENALIZED = "penalized"
    REFERENCE = "reference"


class DirichletConflict(ValueError):
    pass


def p2_basis(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """P2 shape functions on the reference triangle, shape ``(6, *xi.shape)``."""
    l0, l1, l2 = 1.0 - xi - eta, xi, eta
    return np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                     4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0])


def p2_basis_grad(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Reference gradients, shape ``(6, 2, *xi.shape)``."""
    l0, l1, l2 = 1.0 - xi - eta, xi, eta
    one = np.ones_like(l0)
    zero = np.zeros_like(l0)
    dl0 = (-one, -one)
    dl1 = (one, zero)
    dl2 = (zero, one)

    def vert(l, dl):
        return [(4 * l - 1) * dl[0], (4 * l - 1) * dl[1]]

    def edge(la, dla, lb, dlb):
        return [4 * (la * dlb[0] + lb * dla[0]), 4 * (la * dlb[1] + lb * dla[1])]

    return np.array([vert(l0, dl0), vert(l1, dl1), vert(l2, dl2),
                     edge(l0, dl0, l1, dl1), edge(l1, dl1, l2, dl2), edge(l2, dl2, l0, dl0)])


def p1_basis(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    return np.stack([1.0 - xi - eta, xi, eta])


@dataclass(frozen=True)
class InflowProfile:
    """Poiseuille inflow ``u_D = -U (1 + y)(1 - y) n``."""

    U: float

    def __post_init__(self):
        if not self.U > 0:
            raise ValueError(f"peak speed must be positive, got {self.U}")

    def value(self, p, normal) -> np.ndarray:
        y = np.asarray(p, dtype=float)[..., 1]
        s = -self.U * (1.0 + y) * (1.0 - y)
        return s[..., None] * np.asarray(normal, dtype=float)


def inflow_value(profile: InflowProfile, p, outward_normal) -> np.ndarray:
    return profile.value(p, outward_normal)


@dataclass(frozen=True, eq=False)
class TaylorHoodSpace:
    """P2 vector velocity and P1 pressure on a mesh.

    Velocity nodes are the mesh vertices followed by the edge midpoints (edges
    in lexicographic order); node ``n`` owns velocity dofs ``2n`` and ``2n+1``.
    Pressure dof ``i`` (vertex ``i``) sits at system index ``n_velocity + i``.
    """

    mesh: Mesh
    edges: np.ndarray
    tri_edges: np.ndarray
    nodes: np.ndarray
    cell_nodes: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_velocity(self) -> int:
        return 2 * len(self.nodes)

    @property
    def n_pressure(self) -> int:
        return self.mesh.n_vertices

    @property
    def n_total(self) -> int:
        return self.n_velocity + self.n_pressure

    @property
    def velocity_dofs(self) -> np.ndarray:
        """Per-triangle interleaved velocity dofs, shape ``(T, 12)``."""
        return np.stack([2 * self.cell_nodes, 2 * self.cell_nodes + 1], axis=2).reshape(-1, 12)

    @property
    def pressure_dofs(self) -> np.ndarray:
        """Per-triangle pressure dofs as system indices, shape ``(T, 3)``."""
        return self.mesh.triangles + self.n_velocity

    def edge_index(self, a, b) -> np.ndarray:
        a, b = np.minimum(a, b), np.maximum(a, b)
        nv = self.mesh.n_vertices
        key = self.edges[:, 0] * nv + self.edges[:, 1]
        q = np.asarray(a) * nv + np.asarray(b)
        pos = np.searchsorted(key, q)
        pos = np.minimum(pos, len(key) - 1)
        if np.any(key[pos] != q):
            raise KeyError("not an edge of the mesh")
        return pos

    def facet_nodes(self, facet_ids=None) -> np.ndarray:
        """P2 nodes (start, end, midpoint) of boundary facets, shape ``(F, 3)``."""
        f = self.mesh.facets if facet_ids is None else self.mesh.facets[facet_ids]
        mid = self.mesh.n_vertices + self.edge_index(f[:, 0], f[:, 1])
        return np.stack([f[:, 0], f[:, 1], mid], axis=1)

    def interpolate(self, fn) -> np.ndarray:
        """Nodal P2 interpolant of a vector field ``fn(x, y) -> (ux, uy)``."""
        ux, uy = fn(self.nodes[:, 0], self.nodes[:, 1])
        out = np.empty(self.n_velocity)
        out[0::2] = np.broadcast_to(ux, self.n_nodes)
        out[1::2] = np.broadcast_to(uy, self.n_nodes)
        return out


def build_taylor_hood(mesh: Mesh) -> TaylorHoodSpace:
    edges, tri_edges = mesh.edges()
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    nodes = np.concatenate([mesh.vertices, mid])
    cell_nodes = np.concatenate([mesh.triangles, mesh.n_vertices + tri_edges], axis=1)
    for arr in (edges, tri_edges, nodes, cell_nodes):
        arr.setflags(write=False)
    return TaylorHoodSpace(mesh, edges, tri_edges, nodes, cell_nodes)


def facet_normals(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Outward unit normals and lengths of the boundary facets."""
    d = mesh.vertices[mesh.facets[:, 1]] - mesh.vertices[mesh.facets[:, 0]]
    length = np.hypot(d[:, 0], d[:, 1])
    normal = np.stack([d[:, 1], -d[:, 0]], axis=1) / length[:, None]
    return normal, length


@dataclass(frozen=True)
class DirichletSet:
    """Prescribed system dofs (sorted, unique) and their values."""

    dofs: np.ndarray
    values: np.ndarray

    def __len__(self):
        return len(self.dofs)

    @classmethod
    def empty(cls) -> "DirichletSet":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0))

    def homogeneous(self) -> "DirichletSet":
        return DirichletSet(self.dofs, np.zeros_like(self.values))

    def extended(self, dofs, values) -> "DirichletSet":
        return _merge(np.concatenate([self.dofs, np.asarray(dofs, dtype=np.int64)]),
                      np.concatenate([self.values, np.asarray(values, dtype=float)]))


def _merge(dofs, values, tol=1e-12) -> DirichletSet:
    order = np.lexsort((values, dofs))
    dofs, values = dofs[order], values[order]
    uniq, start = np.unique(dofs, return_index=True)
    counts = np.diff(np.append(start, len(dofs)))
    lo = values[start]
    hi = values[start + counts - 1]
    bad = np.flatnonzero(hi - lo > tol)
    if len(bad):
        raise DirichletConflict(
            f"dof {uniq[bad[0]]} prescribed with conflicting values {lo[bad[0]]} and {hi[bad[0]]}")
    return DirichletSet(uniq, lo)


def collect_dirichlet(space: TaylorHoodSpace, scenario, profile: InflowProfile,
                      bc: str = "mixed") -> DirichletSet:
    """Strong velocity conditions on the tagged boundary.

    Inflow facets get the Poiseuille profile, walls get zero, and with the
    reference scenario obstacle boundaries get zero too. Outflow facets are
    free for ``bc="mixed"`` (do-nothing outflow); with ``bc="dirichlet"`` they
    carry the same parabolic velocity as the inflow.
    """
    scenario = Scenario(scenario)
    if bc not in ("mixed", "dirichlet"):
        raise ValueError(f"unknown boundary mode {bc!r}")
    mesh = space.mesh
    normals, _ = facet_normals(mesh)
    tags = mesh.facet_tags
    fnodes = space.facet_nodes()

    values = np.full((len(tags), 3, 2), np.nan)
    pts = space.nodes[fnodes]
    inflow = tags == INFLOW
    values[inflow] = profile.value(pts[inflow], normals[inflow][:, None, :])
    values[tags == WALL] = 0.0
    if bc == "dirichlet":
        out = tags == OUTFLOW
        values[out] = -profile.value(pts[out], normals[out][:, None, :])
    if scenario is Scenario.REFERENCE:
        values[tags < 0] = 0.0

    chosen = ~np.isnan(values[:, 0, 0])
    nodes = fnodes[chosen].ravel()
    vals = values[chosen].reshape(-1, 2)
    dofs = np.stack([2 * nodes, 2 * nodes + 1], axis=1).ravel()
    return _merge(dofs, vals.ravel())
