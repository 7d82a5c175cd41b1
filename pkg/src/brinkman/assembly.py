"""Quadrature, element kernels and global assembly of the Taylor-Hood forms.

The saddle-point system uses the symmetric layout::

    [ nu*A + M_psi   B^T ] [u]
    [ B              0   ] [p]

with ``A`` the vector P2 stiffness, ``M_psi`` the penalty-weighted P2 mass
and ``B[q, u] = -(q, div u)``. The do-nothing outflow is natural.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .penalty import PenaltyField
from .spaces import DirichletSet, TaylorHoodSpace, p1_basis, p2_basis, p2_basis_grad

STOKES_DEGREE = 4
CONVECTION_DEGREE = 5


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    """Points ``(xi, eta)`` and weights on the reference triangle (area 1/2)."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


def _orbit3(a, w):
    b = 1.0 - 2.0 * a
    return [(a, a), (b, a), (a, b)], [w] * 3


def quadrature_rule(degree: int) -> QuadratureRule:
    if degree == 1:
        pts, wts = [(1 / 3, 1 / 3)], [0.5]
    elif degree == 2:
        pts, wts = _orbit3(1 / 6, 1 / 6)
    elif degree in (3, 4):
        # Dunavant 6-point rule, exact to degree 4
        p1, w1 = _orbit3(0.44594849091596488632, 0.22338158967801146570 / 2)
        p2, w2 = _orbit3(0.09157621350977074346, 0.10995174365532186764 / 2)
        pts, wts = p1 + p2, w1 + w2
    elif degree == 5:
        s = np.sqrt(15.0)
        p1, w1 = _orbit3((6 - s) / 21, (155 - s) / 2400)
        p2, w2 = _orbit3((6 + s) / 21, (155 + s) / 2400)
        pts, wts = [(1 / 3, 1 / 3)] + p1 + p2, [9 / 80] + w1 + w2
    else:
        raise AssemblyError(f"unsupported quadrature degree {degree}; choose 1..5")
    return QuadratureRule(np.array(pts), np.array(wts), degree)


class ElementGeometry:
    """Affine maps, P2/P1 basis values and physical P2 gradients at quadrature points."""

    def __init__(self, space: TaylorHoodSpace, rule: QuadratureRule, cells=slice(None)):
        mesh = space.mesh
        tri = mesh.triangles[cells]
        p0, p1, p2 = (mesh.vertices[tri[:, k]] for k in range(3))
        j00, j10 = p1[:, 0] - p0[:, 0], p1[:, 1] - p0[:, 1]
        j01, j11 = p2[:, 0] - p0[:, 0], p2[:, 1] - p0[:, 1]
        det = j00 * j11 - j01 * j10
        xi, eta = rule.points[:, 0], rule.points[:, 1]
        self.det = det
        self.wdet = det[:, None] * rule.weights[None, :]  # (T, nq)
        self.phi = p2_basis(xi, eta)  # (6, nq)
        self.psi = p1_basis(xi, eta)  # (3, nq)
        g = p2_basis_grad(xi, eta)  # (6, 2, nq)
        # inverse transpose of the Jacobian
        ijt = np.stack([np.stack([j11, -j10], 1), np.stack([-j01, j00], 1)], 1) / det[:, None, None]
        self.grad = np.einsum("tij,ajq->tqai", ijt, g)  # (T, nq, 6, 2)
        self.x = (np.einsum("aq,ta->tq", p1_basis(xi, eta), mesh.vertices[tri][..., 0]),
                  np.einsum("aq,ta->tq", p1_basis(xi, eta), mesh.vertices[tri][..., 1]))


def _workers() -> int:
    try:
        n = int(os.environ.get("BRINKMAN_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, min(n, os.cpu_count() or 1))


def _chunked(fn, n_cells: int):
    """Apply ``fn(slice)`` over element blocks; results come back in element order."""
    workers = _workers()
    if workers == 1 or n_cells < 2048:
        return [fn(slice(0, n_cells))]
    bounds = np.linspace(0, n_cells, workers * 4 + 1).astype(int)
    blocks = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, blocks))


def _vector_block(scalar: np.ndarray) -> np.ndarray:
    """Expand a ``(T, 6, 6)`` scalar block to interleaved ``(T, 12, 12)`` with identity coupling."""
    t = scalar.shape[0]
    out = np.zeros((t, 6, 2, 6, 2))
    out[:, :, 0, :, 0] = scalar
    out[:, :, 1, :, 1] = scalar
    return out.reshape(t, 12, 12)


def local_stiffness(geo: ElementGeometry) -> np.ndarray:
    return np.einsum("tq,tqai,tqbi->tab", geo.wdet, geo.grad, geo.grad)


def local_mass(geo: ElementGeometry) -> np.ndarray:
    return np.einsum("tq,aq,bq->tab", geo.wdet, geo.phi, geo.phi)


def local_divergence(geo: ElementGeometry) -> np.ndarray:
    """``-(q_c, div(phi_b e_k))`` as ``(T, 3, 12)``."""
    d = -np.einsum("tq,cq,tqbk->tcbk", geo.wdet, geo.psi, geo.grad)
    return d.reshape(d.shape[0], 3, 12)


def to_csr(rows, cols, vals, shape) -> sp.csr_matrix:
    m = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Sparse system over velocity then pressure dofs."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    eliminated: bool = False
    dirichlet: DirichletSet | None = None

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(len(self.rhs), dtype=bool)
        if self.dirichlet is not None:
            mask[self.dirichlet.dofs] = False
        return mask


def assemble_stokes(space: TaylorHoodSpace, nu: float, psi: PenaltyField | None) -> LinearSystem:
    """Penalized Stokes saddle-point matrix with zero right-hand side."""
    mesh = space.mesh
    if psi is None:
        penalty = np.zeros(mesh.n_triangles)
    else:
        if len(psi.indicator) != mesh.n_triangles:
            raise AssemblyError("penalty field and space are defined on different meshes")
        penalty = psi.values
    rule = quadrature_rule(STOKES_DEGREE)
    vdofs = space.velocity_dofs
    pdofs = space.pressure_dofs

    def block(cells):
        geo = ElementGeometry(space, rule, cells)
        kv = _vector_block(nu * local_stiffness(geo) + penalty[cells, None, None] * local_mass(geo))
        kb = local_divergence(geo)
        v = vdofs[cells]
        p = pdofs[cells]
        rows = [np.repeat(v, 12, axis=1).ravel(), np.repeat(p, 12, axis=1).ravel(),
                np.tile(v, (1, 3)).ravel()]
        cols = [np.tile(v, (1, 12)).ravel(), np.tile(v, (1, 3)).ravel(),
                np.repeat(p, 12, axis=1).ravel()]
        vals = [kv.ravel(), kb.ravel(), kb.ravel()]
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)

    parts = _chunked(block, mesh.n_triangles)
    rows, cols, vals = (np.concatenate([p[i] for p in parts]) for i in range(3))
    n = space.n_total
    return LinearSystem(to_csr(rows, cols, vals, (n, n)), np.zeros(n))


def assemble_convection(space: TaylorHoodSpace, u: np.ndarray):
    """Convection residual ``((grad u) u, w)`` and its full Newton Jacobian.

    Both are sized to the whole system (pressure rows and columns empty).
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (space.n_velocity,):
        raise AssemblyError(f"velocity vector has shape {u.shape}, expected ({space.n_velocity},)")
    rule = quadrature_rule(CONVECTION_DEGREE)
    vdofs = space.velocity_dofs
    n = space.n_total

    def block(cells):
        geo = ElementGeometry(space, rule, cells)
        v = vdofs[cells]
        ue = u[v].reshape(-1, 6, 2)
        uq = np.einsum("aq,tai->tqi", geo.phi, ue)
        gu = np.einsum("tai,tqaj->tqij", ue, geo.grad)
        conv = np.einsum("tqij,tqj->tqi", gu, uq)
        res = np.einsum("tq,aq,tqi->tai", geo.wdet, geo.phi, conv).reshape(-1, 12)
        adv = np.einsum("tqj,tqbj->tqb", uq, geo.grad)
        j1 = _vector_block(np.einsum("tq,aq,tqb->tab", geo.wdet, geo.phi, adv))
        j2 = np.einsum("tq,aq,bq,tqik->taibk", geo.wdet, geo.phi, geo.phi, gu).reshape(-1, 12, 12)
        rows = np.repeat(v, 12, axis=1).ravel()
        cols = np.tile(v, (1, 12)).ravel()
        return res, v, rows, cols, (j1 + j2).ravel()

    parts = _chunked(block, space.mesh.n_triangles)
    res = np.concatenate([p[0] for p in parts])
    v = np.concatenate([p[1] for p in parts])
    residual = np.bincount(v.ravel(), weights=res.ravel(), minlength=n)
    rows, cols, vals = (np.concatenate([p[i] for p in parts]) for i in (2, 3, 4))
    return residual, to_csr(rows, cols, vals, (n, n))


def apply_dirichlet(system: LinearSystem, dirichlet: DirichletSet) -> LinearSystem:
    """Symmetric elimination: prescribed rows and columns become identity.

    Known values are moved to the right-hand side of the free rows.
    """
    if system.eliminated:
        raise AssemblyError("system already has Dirichlet conditions eliminated")
    k = system.matrix
    n = k.shape[0]
    if len(dirichlet) == 0:
        return LinearSystem(k, system.rhs.copy(), True, dirichlet)
    if dirichlet.dofs.max() >= n:
        raise AssemblyError("Dirichlet dof outside the system")
    fixed = np.zeros(n, dtype=bool)
    fixed[dirichlet.dofs] = True
    g = np.zeros(n)
    g[dirichlet.dofs] = dirichlet.values
    rhs = system.rhs - k @ g
    rhs[dirichlet.dofs] = dirichlet.values
    keep = sp.diags((~fixed).astype(float))
    m = (keep @ k @ keep + sp.diags(fixed.astype(float))).tocsr()
    m.eliminate_zeros()
    m.sort_indices()
    return LinearSystem(m, rhs, True, dirichlet)
