"""Error norms, flux and invariant diagnostics, penalty rates, and the R sweep."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import STOKES_DEGREE, ElementGeometry, assemble_stokes, local_divergence, quadrature_rule
from .mesh import Mesh
from .penalty import ObstacleSet
from .solver import FlowSolution, SolverConfig, SolverError, setup_problem, solve_navier_stokes, solve_stokes
from .spaces import Scenario, TaylorHoodSpace, facet_normals

log = logging.getLogger(__name__)

EQUATIONS = ("stokes", "navier-stokes")


class AnalysisError(ValueError):
    pass


def _cell_velocity(space: TaylorHoodSpace, u: np.ndarray) -> np.ndarray:
    return u[space.velocity_dofs].reshape(-1, 6, 2)


def l2_norm_region(sol: FlowSolution, region=None) -> float:
    """L2 norm of the velocity over the triangles in ``region`` (all obstacle triangles by default)."""
    mesh = sol.space.mesh
    if region is None:
        region = mesh.regions > 0
    cells = np.flatnonzero(region)
    if not len(cells):
        return 0.0
    geo = ElementGeometry(sol.space, quadrature_rule(STOKES_DEGREE), cells)
    ue = _cell_velocity(sol.space, sol.velocity)[cells]
    uq = np.einsum("aq,tai->tqi", geo.phi, ue)
    return float(np.sqrt(np.sum(geo.wdet * np.sum(uq ** 2, axis=2))))


def h1_seminorm(space: TaylorHoodSpace, u: np.ndarray, region=None) -> float:
    cells = np.arange(space.mesh.n_triangles) if region is None else np.flatnonzero(region)
    geo = ElementGeometry(space, quadrature_rule(STOKES_DEGREE), cells)
    ue = _cell_velocity(space, u)[cells]
    gu = np.einsum("tai,tqaj->tqij", ue, geo.grad)
    return float(np.sqrt(np.sum(geo.wdet * np.sum(gu ** 2, axis=(2, 3)))))


def prolong_by_zero(ref: FlowSolution, parent: TaylorHoodSpace, vertex_map=None) -> np.ndarray:
    """Reference velocity on the parent space, zero on nodes outside the submesh."""
    vmap = ref.vertex_map if vertex_map is None else np.asarray(vertex_map)
    sub = ref.space
    if vmap is None or len(vmap) != sub.mesh.n_vertices:
        raise AnalysisError("map inconsistency: vertex map does not match the submesh")
    if vmap.max() >= parent.mesh.n_vertices or not np.array_equal(sub.mesh.vertices, parent.mesh.vertices[vmap]):
        raise AnalysisError("map inconsistency: mapped vertices differ from parent vertices")
    try:
        edge_map = parent.edge_index(vmap[sub.edges[:, 0]], vmap[sub.edges[:, 1]])
    except KeyError:
        raise AnalysisError("map inconsistency: submesh edge missing from parent") from None
    node_map = np.concatenate([vmap, parent.mesh.n_vertices + edge_map])
    out = np.zeros(parent.n_velocity)
    out[2 * node_map] = ref.velocity[0::2]
    out[2 * node_map + 1] = ref.velocity[1::2]
    return out


def h1_seminorm_diff(ref: FlowSolution, pen: FlowSolution, vertex_map=None) -> float:
    """``|u - u_R|_1`` on the full mesh with the reference extended by zero."""
    u = prolong_by_zero(ref, pen.space, vertex_map)
    return h1_seminorm(pen.space, u - pen.velocity)


_GAUSS3 = (np.array([0.5 - 0.5 * np.sqrt(0.6), 0.5, 0.5 + 0.5 * np.sqrt(0.6)]),
           np.array([5 / 18, 8 / 18, 5 / 18]))


def flux(sol: FlowSolution, tag: int) -> float:
    """Outward flux ``int u.n`` over the facets carrying ``tag``."""
    space = sol.space
    ids = np.flatnonzero(space.mesh.facet_tags == tag)
    if not len(ids):
        return 0.0
    normal, length = facet_normals(space.mesh)
    nodes = space.facet_nodes(ids)
    s, w = _GAUSS3
    shape = np.stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)])  # (3 nodes, 3 points)
    un = sol.velocity[2 * nodes] * normal[ids, 0:1] + sol.velocity[2 * nodes + 1] * normal[ids, 1:2]
    return float(np.sum(length[ids] * ((un @ shape) @ w)))


def divergence_residual(sol: FlowSolution) -> np.ndarray:
    """``(q_i, div u)`` for each P1 pressure basis function."""
    space = sol.space
    geo = ElementGeometry(space, quadrature_rule(STOKES_DEGREE))
    loc = -local_divergence(geo)
    contrib = np.einsum("tcj,tj->tc", loc, sol.velocity[space.velocity_dofs])
    return np.bincount(space.mesh.triangles.ravel(), weights=contrib.ravel(), minlength=space.n_pressure)


def scaled_divergence(sol: FlowSolution) -> float:
    """Largest ``|(q_i, div u)|`` divided by ``U`` times the area of the support of ``q_i``."""
    mesh = sol.space.mesh
    support = np.bincount(mesh.triangles.ravel(), weights=np.repeat(mesh.areas(), 3), minlength=mesh.n_vertices)
    return float(np.max(np.abs(divergence_residual(sol)) / (sol.U * support)))


def energy_terms(sol: FlowSolution) -> tuple[float, float]:
    """Dissipation ``nu |u|_1^2 + R ||u||^2_S`` and the boundary work ``x_D . (K x)_D``.

    The two agree for a penalized Stokes solution.
    """
    space = sol.space
    u = sol.velocity
    dissipation = sol.nu * h1_seminorm(space, u) ** 2
    if sol.penalty is not None and sol.R:
        dissipation += sol.R * l2_norm_region(sol, sol.penalty.indicator) ** 2
    x = sol.vector
    k = assemble_stokes(space, sol.nu, sol.penalty).matrix
    dofs = sol.dirichlet.dofs
    work = float(x[dofs] @ (k @ x)[dofs])
    return float(dissipation), work


def rates(R_values, errors) -> list[float | None]:
    """``log(e_{i-1}/e_i) / log(R_i/R_{i-1})``; ``None`` for the first entry."""
    out: list[float | None] = [None]
    for i in range(1, len(errors)):
        out.append(float(np.log(errors[i - 1] / errors[i]) / np.log(R_values[i] / R_values[i - 1])))
    return out


def fitted_slope(R_values, errors) -> float:
    """Least-squares slope of log(error) against log(R)."""
    return float(np.polyfit(np.log(np.asarray(R_values, float)), np.log(np.asarray(errors, float)), 1)[0])


@dataclass(frozen=True)
class ConvergenceRecord:
    R: float
    err_l2_obstacle: float
    err_h1: float
    rate_l2: float | None = None
    rate_h1: float | None = None
    newton_iterations: int | None = field(default=None, compare=False)


@dataclass
class StudyConfig:
    mesh: Mesh
    equation: str = "stokes"
    R_values: tuple = tuple(10.0 ** n for n in range(11))
    nu: float = 1.0
    U: float = 100.0
    bc: str = "mixed"
    obstacles: ObstacleSet | None = None
    csv_path: Path | None = None
    markdown_path: Path | None = None

    def __post_init__(self):
        if self.equation not in EQUATIONS:
            raise AnalysisError(f"unknown equation {self.equation!r}; choose from {EQUATIONS}")
        r = np.asarray(self.R_values, dtype=float)
        if not len(r) or np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise AnalysisError("R values must be positive and strictly increasing")


class StudyError(SolverError):
    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


def with_rates(records) -> list[ConvergenceRecord]:
    R = [r.R for r in records]
    rl2 = rates(R, [r.err_l2_obstacle for r in records])
    rh1 = rates(R, [r.err_h1 for r in records])
    return [ConvergenceRecord(r.R, r.err_l2_obstacle, r.err_h1, a, b, r.newton_iterations)
            for r, a, b in zip(records, rl2, rh1)]


def run_convergence_study(cfg: StudyConfig) -> list[ConvergenceRecord]:
    """Reference solve on the fluid submesh, then the penalized solve for each R.

    Navier-Stokes solves are warm-started from the previous R. Tables are
    written when paths are configured, also for the partial record list of a
    failed run.
    """
    from .io import write_table

    base = SolverConfig(nu=cfg.nu, U=cfg.U, bc=cfg.bc)
    ns = cfg.equation == "navier-stokes"
    records: list[ConvergenceRecord] = []

    def flush():
        out = with_rates(records)
        if out and cfg.csv_path:
            write_table(out, cfg.csv_path, "csv")
        if out and cfg.markdown_path:
            write_table(out, cfg.markdown_path, "markdown", equation=cfg.equation)
        return out

    try:
        t0 = time.perf_counter()
        if ns:
            ref, _ = solve_navier_stokes(cfg.mesh, cfg.obstacles, base, Scenario.REFERENCE)
        else:
            ref = solve_stokes(cfg.mesh, cfg.obstacles, base, Scenario.REFERENCE)
        log.info("reference solved in %.2fs", time.perf_counter() - t0)
        problem = setup_problem(cfg.mesh, cfg.obstacles, base, Scenario.PENALIZED)
        prev = None
        for R in cfg.R_values:
            conf = SolverConfig(nu=cfg.nu, U=cfg.U, R=float(R), bc=cfg.bc)
            iters = None
            if ns:
                prev, report = solve_navier_stokes(cfg.mesh, cfg.obstacles, conf, initial=prev, problem=problem)
                iters = report.iterations
            else:
                prev = solve_stokes(cfg.mesh, cfg.obstacles, conf, problem=problem)
            rec = ConvergenceRecord(float(R), l2_norm_region(prev, prev.penalty.indicator),
                                    h1_seminorm_diff(ref, prev), newton_iterations=iters)
            records.append(rec)
            log.info("R=%.1e l2=%.4e h1=%.4e newton=%s", R, rec.err_l2_obstacle, rec.err_h1, iters)
    except SolverError as exc:
        raise StudyError(f"study aborted after {len(records)} records: {exc}", flush()) from exc
    return flush()
