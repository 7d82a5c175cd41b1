"""Direct solves of the penalized Stokes system and Newton iteration for Navier-Stokes."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import LinearSystem, apply_dirichlet, assemble_convection, assemble_stokes
from .mesh import Mesh, extract_fluid_submesh
from .penalty import ObstacleSet, PenaltyField, build_penalty_field, classify_triangles
from .spaces import DirichletSet, InflowProfile, Scenario, TaylorHoodSpace, build_taylor_hood, collect_dirichlet

log = logging.getLogger(__name__)

LU_RESIDUAL_TOL = 1e-10


class SolverError(RuntimeError):
    pass


class SingularMatrixError(SolverError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class NewtonError(SolverError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


def _scaled_residual(a, x, b) -> float:
    r = np.abs(a @ x - b).max(initial=0.0)
    anorm = abs(a).sum(axis=1).max()
    denom = anorm * np.abs(x).max(initial=0.0) + np.abs(b).max(initial=0.0)
    return r / denom if denom > 0 else r


def equilibrate(a) -> np.ndarray:
    """Symmetric diagonal scaling for saddle-point matrices.

    Rows with a nonzero diagonal get ``|a_ii|^-1/2``. Zero-diagonal rows (the
    pressure block) get the inverse root of the approximate Schur complement
    diagonal ``sum_i a_ji^2 / |a_ii|``, which removes the penalty-driven
    spread of pivot sizes.
    """
    a = sp.csr_matrix(a)
    diag = np.abs(a.diagonal())
    scale = np.zeros(a.shape[0])
    nz = diag > 0
    scale[nz] = 1.0 / np.sqrt(diag[nz])
    if not nz.all():
        inv = np.zeros_like(diag)
        inv[nz] = 1.0 / diag[nz]
        schur = a.multiply(a) @ inv
        ok = ~nz & (schur > 0)
        scale[ok] = 1.0 / np.sqrt(schur[ok])
        rest = ~nz & ~(schur > 0)
        scale[rest] = 1.0 / np.asarray(abs(a).max(axis=1).todense()).ravel()[rest]
    return scale


def sparse_lu_solve(system, rhs=None, refine: int = 3) -> np.ndarray:
    """Solve with SuperLU (partial pivoting, COLAMD ordering) on the equilibrated matrix.

    Accepts a :class:`LinearSystem` or a matrix and right-hand side. Raises
    :class:`SingularMatrixError` naming the offending row when a pivot of the
    scaled factorization is numerically zero, and :class:`SolverError` when
    the scaled residual ``|Ax - b|_inf / (|A|_inf |x|_inf + |b|_inf)`` stays
    above 1e-10 after iterative refinement.
    """
    if isinstance(system, LinearSystem):
        a, b = system.matrix, system.rhs
    else:
        a, b = system, rhs
    a = sp.csc_matrix(a)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or b.shape != (n,):
        raise SolverError(f"shape mismatch: matrix {a.shape}, rhs {b.shape}")

    empty_col = np.flatnonzero(np.diff(a.indptr) == 0)
    empty_row = np.flatnonzero(np.bincount(a.indices, minlength=n) == 0)
    if len(empty_row) or len(empty_col):
        row = int(empty_row[0]) if len(empty_row) else int(empty_col[0])
        raise SingularMatrixError(f"matrix is structurally singular at row {row}", row)

    d = equilibrate(a)
    dm = sp.diags(d)
    scaled = sp.csc_matrix(dm @ a @ dm)
    try:
        lu = spla.splu(scaled, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularMatrixError(f"matrix is exactly singular ({exc})") from exc

    pivots = np.abs(lu.U.diagonal())
    k = int(np.argmin(pivots))
    if pivots[k] <= n * np.finfo(float).eps * abs(scaled).max():
        row = int(np.argsort(lu.perm_r)[k])
        raise SingularMatrixError(f"numerically singular pivot {pivots[k]:.3e} at row {row}", row)

    def solve(r):
        return d * lu.solve(d * r)

    x = solve(b)
    for _ in range(refine):
        if _scaled_residual(a, x, b) < 1e-15:
            break
        x = x + solve(b - a @ x)
    res = _scaled_residual(a, x, b)
    if not np.all(np.isfinite(x)) or res >= LU_RESIDUAL_TOL:
        raise SolverError(f"direct solve inaccurate: scaled residual {res:.3e}")
    return x


@dataclass(frozen=True)
class SolverConfig:
    nu: float = 1.0
    U: float = 100.0
    R: float = 0.0
    newton_rel_tol: float = 1e-10
    newton_abs_tol: float = 1e-12
    newton_max_iters: int = 25
    continuation: tuple = tuple(10.0 ** n for n in range(11))
    bc: str = "mixed"

    def __post_init__(self):
        if not (self.newton_rel_tol > 0 and self.newton_abs_tol > 0):
            raise ValueError("Newton tolerances must be positive")
        if self.newton_max_iters < 1:
            raise ValueError("newton_max_iters must be at least 1")
        if not self.nu > 0:
            raise ValueError("viscosity must be positive")
        if self.R < 0:
            raise ValueError("penalty must be non-negative")
        if self.bc not in ("mixed", "dirichlet"):
            raise ValueError(f"unknown boundary mode {self.bc!r}")


@dataclass(frozen=True)
class NewtonReport:
    residual_norms: tuple
    converged: bool
    iterations: int
    R: float | None = None
    stages: tuple = ()


@dataclass(frozen=True, eq=False)
class FlowSolution:
    space: TaylorHoodSpace
    velocity: np.ndarray
    pressure: np.ndarray
    nu: float
    U: float
    R: float | None
    scenario: Scenario
    penalty: PenaltyField | None = None
    vertex_map: np.ndarray | None = None
    dirichlet: DirichletSet | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.velocity.shape != (self.space.n_velocity,) or self.pressure.shape != (self.space.n_pressure,):
            raise SolverError("solution vector sizes do not match the space")
        if not (np.all(np.isfinite(self.velocity)) and np.all(np.isfinite(self.pressure))):
            raise SolverError("solution has non-finite entries")

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.velocity, self.pressure])


@dataclass(frozen=True, eq=False)
class Problem:
    """Mesh, space and boundary data for one scenario."""

    mesh: Mesh
    space: TaylorHoodSpace
    dirichlet: DirichletSet
    scenario: Scenario
    vertex_map: np.ndarray | None
    pinned: bool

    def penalty(self, R) -> PenaltyField | None:
        if self.scenario is Scenario.REFERENCE:
            return None
        return build_penalty_field(self.mesh, None, R)


def setup_problem(mesh: Mesh, obstacles: ObstacleSet | None, config: SolverConfig, scenario) -> Problem:
    scenario = Scenario(scenario)
    if obstacles is not None and not obstacles.uses_regions:
        mesh = mesh.with_regions(classify_triangles(mesh, obstacles))
    vmap = None
    if scenario is Scenario.REFERENCE:
        mesh, vmap = extract_fluid_submesh(mesh)
    space = build_taylor_hood(mesh)
    dset = collect_dirichlet(space, scenario, InflowProfile(config.U), config.bc)
    pinned = config.bc == "dirichlet"
    if pinned:
        # pure velocity conditions leave the pressure constant free; pin vertex 0
        dset = dset.extended([space.n_velocity], [0.0])
    return Problem(mesh, space, dset, scenario, vmap, pinned)


def _finish(problem: Problem, x: np.ndarray, config: SolverConfig, R, psi) -> FlowSolution:
    space = problem.space
    u = x[:space.n_velocity].copy()
    p = x[space.n_velocity:].copy()
    if problem.pinned:
        area = space.mesh.areas()
        p -= np.sum(area * p[space.mesh.triangles].mean(axis=1)) / area.sum()
    return FlowSolution(space, u, p, config.nu, config.U, R, problem.scenario, psi,
                        problem.vertex_map, problem.dirichlet)


def solve_stokes(mesh: Mesh, obstacles: ObstacleSet | None, config: SolverConfig,
                 scenario=Scenario.PENALIZED, problem: Problem | None = None) -> FlowSolution:
    """Steady Stokes flow; the reference scenario runs on the fluid submesh."""
    problem = problem or setup_problem(mesh, obstacles, config, scenario)
    R = None if problem.scenario is Scenario.REFERENCE else config.R
    psi = problem.penalty(R)
    system = apply_dirichlet(assemble_stokes(problem.space, config.nu, psi), problem.dirichlet)
    return _finish(problem, sparse_lu_solve(system), config, R, psi)


def _residual_and_jacobian(space, stokes: LinearSystem, x):
    conv, jac = assemble_convection(space, x[:space.n_velocity])
    return stokes.matrix @ x - stokes.rhs + conv, stokes.matrix + jac


def newton(space: TaylorHoodSpace, stokes: LinearSystem, dirichlet: DirichletSet, x0: np.ndarray,
           config: SolverConfig, R=None) -> tuple[np.ndarray, NewtonReport]:
    """Full Newton iteration on the free-dof residual of the Navier-Stokes system.

    Stops when the Euclidean free-dof residual drops below
    ``max(abs_tol, rel_tol * initial residual)`` or the update falls below
    ``rel_tol`` times the iterate (max norms).
    """
    x = np.array(x0, dtype=float)
    x[dirichlet.dofs] = dirichlet.values
    free = np.ones(len(x), dtype=bool)
    free[dirichlet.dofs] = False
    hom = dirichlet.homogeneous()

    f, jac = _residual_and_jacobian(space, stokes, x)
    norms = [float(np.linalg.norm(f[free]))]
    if norms[0] <= config.newton_abs_tol:
        return x, NewtonReport(tuple(norms), True, 0, R)
    target = max(config.newton_abs_tol, config.newton_rel_tol * norms[0])
    growth = 0
    for it in range(1, config.newton_max_iters + 1):
        step = sparse_lu_solve(apply_dirichlet(LinearSystem(jac, -f), hom))
        x += step
        f, jac = _residual_and_jacobian(space, stokes, x)
        norms.append(float(np.linalg.norm(f[free])))
        log.debug("newton R=%s it=%d residual=%.3e", R, it, norms[-1])
        if not np.isfinite(norms[-1]):
            raise NewtonError("Newton residual is not finite", NewtonReport(tuple(norms), False, it, R))
        if norms[-1] <= target or np.abs(step).max() <= config.newton_rel_tol * np.abs(x).max():
            return x, NewtonReport(tuple(norms), True, it, R)
        growth = growth + 1 if norms[-1] > norms[-2] else 0
        if growth >= 3:
            raise NewtonError(f"Newton diverged at R={R}: residual grew for 3 iterations",
                              NewtonReport(tuple(norms), False, it, R))
    raise NewtonError(f"Newton did not converge in {config.newton_max_iters} iterations at R={R}",
                      NewtonReport(tuple(norms), False, config.newton_max_iters, R))


def solve_navier_stokes(mesh: Mesh, obstacles: ObstacleSet | None, config: SolverConfig,
                        scenario=Scenario.PENALIZED, initial: FlowSolution | None = None,
                        problem: Problem | None = None) -> tuple[FlowSolution, NewtonReport]:
    """Steady Navier-Stokes flow by Newton's method.

    Without ``initial`` the iteration starts from a Stokes solve; for the
    penalized scenario it then walks the continuation values below
    ``config.R`` before the target, warm-starting each from the last.
    """
    problem = problem or setup_problem(mesh, obstacles, config, scenario)
    if problem.scenario is Scenario.REFERENCE:
        ladder = [None]
    elif initial is None:
        ladder = sorted(r for r in config.continuation if r < config.R) + [config.R]
    else:
        ladder = [config.R]

    if initial is None:
        first = replace(config, R=ladder[0] or 0.0)
        initial = solve_stokes(mesh, obstacles, first, problem.scenario, problem=problem)
    elif initial.space.n_total != problem.space.n_total:
        raise SolverError("initial guess lives on a different space")
    x = initial.vector
    if problem.pinned:
        # undo the zero-mean shift so the pinned pressure dof is consistent
        x[problem.space.n_velocity:] -= x[problem.space.n_velocity]

    reports = []
    for R in ladder:
        psi = problem.penalty(R)
        stokes = assemble_stokes(problem.space, config.nu, psi)
        x, rep = newton(problem.space, stokes, problem.dirichlet, x, config, R)
        reports.append(rep)
    final = replace(reports[-1], stages=tuple(reports[:-1]))
    R = ladder[-1]
    return _finish(problem, x, config, R, problem.penalty(R)), final
