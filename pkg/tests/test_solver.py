import numpy as np
import pytest
import scipy.sparse as sp

from brinkman.analysis import l2_norm_region
from brinkman.assembly import LinearSystem, apply_dirichlet, assemble_stokes
from brinkman.config import load_fixture
from brinkman.mesh import generate_channel_mesh
from brinkman.solver import (NewtonError, SingularMatrixError, SolverConfig, SolverError, newton, setup_problem,
                             solve_navier_stokes, solve_stokes, sparse_lu_solve)
from brinkman.spaces import DirichletSet, Scenario, build_taylor_hood


def gauss_solve(a, b):
    """Textbook dense Gaussian elimination with partial pivoting."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        a[[k, p]] = a[[p, k]]
        b[[k, p]] = b[[p, k]]
        for i in range(k + 1, n):
            f = a[i, k] / a[k, k]
            a[i, k:] -= f * a[k, k:]
            b[i] -= f * b[k]
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


@pytest.fixture(scope="module")
def channel():
    return generate_channel_mesh(-2, 2, -1, 1, [(-1.1, -0.9, 0.4, 1.0)], 0.1)


def test_identity_solve():
    b = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(sparse_lu_solve(sp.identity(3, format="csr"), b), b)


def test_pivoting_on_zero_diagonal():
    a = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.array_equal(sparse_lu_solve(a, np.array([1.0, 2.0])), [2.0, 1.0])


def test_lid_driven_cavity_against_dense_elimination(unit_grid):
    space = build_taylor_hood(unit_grid)
    system = assemble_stokes(space, 1.0, None)
    nodes = np.unique(space.facet_nodes(np.arange(len(unit_grid.facets))))
    top = space.nodes[nodes, 1] == 1.0
    dofs = np.concatenate([2 * nodes, 2 * nodes + 1, [space.n_velocity]])
    vals = np.concatenate([top.astype(float), np.zeros(len(nodes)), [0.0]])
    order = np.argsort(dofs)
    eliminated = apply_dirichlet(system, DirichletSet(dofs[order], vals[order]))
    x = sparse_lu_solve(eliminated)
    oracle = gauss_solve(eliminated.matrix.toarray(), eliminated.rhs)
    assert np.abs(x - oracle).max() < 1e-10 * max(1.0, np.abs(oracle).max())


def test_singular_system_reports_row(unit_grid):
    # pure velocity conditions without a pressure pin leave the constant pressure free
    space = build_taylor_hood(unit_grid)
    nodes = np.unique(space.facet_nodes(np.arange(len(unit_grid.facets))))
    dofs = np.sort(np.concatenate([2 * nodes, 2 * nodes + 1]))
    eliminated = apply_dirichlet(assemble_stokes(space, 1.0, None), DirichletSet(dofs, np.zeros(len(dofs))))
    with pytest.raises(SingularMatrixError) as info:
        sparse_lu_solve(eliminated)
    assert info.value.row is not None


def test_structurally_singular():
    a = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(SingularMatrixError) as info:
        sparse_lu_solve(a, np.ones(2))
    assert info.value.row == 1


def test_shape_mismatch():
    with pytest.raises(SolverError):
        sparse_lu_solve(sp.identity(3, format="csr"), np.ones(2))


def test_poiseuille_recovered():
    mesh = generate_channel_mesh(-2, 2, -1, 1, [], 0.1)
    sol = solve_stokes(mesh, None, SolverConfig(U=100.0))
    nodes = sol.space.nodes
    exact = 100.0 * (1 - nodes[:, 1] ** 2)
    assert np.abs(sol.velocity[0::2] - exact).max() < 1e-8 * 100
    assert np.abs(sol.velocity[1::2]).max() < 1e-8 * 100
    x = mesh.vertices[:, 0]
    # dp/dx = -2 nu U with zero mean outflow pressure
    assert np.abs(sol.pressure - 200.0 * (2 - x)).max() < 1e-6 * 200


def test_reference_scenario_zero_on_obstacle(channel):
    sol = solve_stokes(channel, None, SolverConfig(), Scenario.REFERENCE)
    space = sol.space
    iface = np.unique(space.facet_nodes(np.flatnonzero(space.mesh.facet_tags == -1)))
    assert np.all(sol.velocity[2 * iface] == 0.0)
    assert np.all(sol.velocity[2 * iface + 1] == 0.0)
    assert sol.vertex_map is not None
    assert space.mesh.n_triangles == channel.n_triangles - np.count_nonzero(channel.regions)


def test_large_penalty_damps_obstacle_velocity(channel):
    low = solve_stokes(channel, None, SolverConfig(R=1.0))
    high = solve_stokes(channel, None, SolverConfig(R=1e10))
    ratio = l2_norm_region(high, high.penalty.indicator) / l2_norm_region(low, low.penalty.indicator)
    assert ratio < 1e-4


def test_large_penalty_on_two_obstacle_geometry():
    mesh = load_fixture("paper_channel_coarse.msh")
    sol = solve_stokes(mesh, None, SolverConfig(R=1e10))
    whole = l2_norm_region(sol, np.ones(mesh.n_triangles, bool))
    assert l2_norm_region(sol, sol.penalty.indicator) < 1e-4 * whole


def test_zero_penalty_is_plain_stokes(channel):
    a = solve_stokes(channel, None, SolverConfig(R=0.0))
    flat = generate_channel_mesh(-2, 2, -1, 1, [], 0.1)
    b = solve_stokes(flat, None, SolverConfig())
    assert np.abs(a.velocity - b.velocity).max() < 1e-8 * 100


def test_dirichlet_mode_zero_mean_pressure(channel):
    sol = solve_stokes(channel, None, SolverConfig(R=1e4, bc="dirichlet"))
    mesh = sol.space.mesh
    area = mesh.areas()
    mean = np.sum(area * sol.pressure[mesh.triangles].mean(axis=1)) / area.sum()
    assert abs(mean) < 1e-9 * np.abs(sol.pressure).max()
    out = np.flatnonzero(np.isclose(sol.space.nodes[:, 0], 2.0))
    assert np.allclose(sol.velocity[2 * out], 100 * (1 - sol.space.nodes[out, 1] ** 2))


def test_navier_stokes_small_speed_matches_stokes(channel):
    # the convective correction relative to U shrinks linearly with U
    gaps = []
    for U in (1e-3, 1e-4):
        conf = SolverConfig(U=U, R=1e2)
        ns, report = solve_navier_stokes(channel, None, conf)
        assert report.converged
        gaps.append(np.abs(ns.velocity - solve_stokes(channel, None, conf).velocity).max() / U)
    assert gaps[0] < 1e-4
    assert gaps[1] == pytest.approx(gaps[0] / 10, rel=1e-2)


def test_navier_stokes_re200_high_penalty(channel):
    sol, report = solve_navier_stokes(channel, None, SolverConfig(U=100.0, nu=1.0, R=1e6))
    assert report.converged
    assert report.iterations <= 15
    assert all(s.iterations <= 25 for s in report.stages)
    assert [s.R for s in report.stages] == [1.0, 10.0, 100.0, 1e3, 1e4, 1e5]
    assert report.residual_norms[-1] <= max(1e-12, 1e-10 * report.residual_norms[0])


def test_converged_initial_guess_needs_one_step(channel):
    conf = SolverConfig(R=1e3)
    sol, _ = solve_navier_stokes(channel, None, conf)
    again, report = solve_navier_stokes(channel, None, conf, initial=sol)
    assert report.iterations <= 1
    assert np.abs(again.velocity - sol.velocity).max() < 1e-8 * 100


def test_navier_stokes_dirichlet_mode(channel):
    conf = SolverConfig(R=1e3, bc="dirichlet", continuation=(1.0, 10.0, 100.0))
    sol, report = solve_navier_stokes(channel, None, conf)
    assert report.converged
    mesh = sol.space.mesh
    area = mesh.areas()
    assert abs(np.sum(area * sol.pressure[mesh.triangles].mean(axis=1))) < 1e-8 * np.abs(sol.pressure).max()


def test_newton_iteration_cap(channel):
    conf = SolverConfig(R=1e3, newton_max_iters=1, newton_rel_tol=1e-15, newton_abs_tol=1e-30)
    problem = setup_problem(channel, None, conf, Scenario.PENALIZED)
    stokes = assemble_stokes(problem.space, 1.0, problem.penalty(1e3))
    with pytest.raises(NewtonError) as info:
        newton(problem.space, stokes, problem.dirichlet, np.zeros(problem.space.n_total), conf, 1e3)
    assert not info.value.report.converged


def test_initial_guess_space_mismatch(channel):
    other = solve_stokes(generate_channel_mesh(-2, 2, -1, 1, [], 0.25), None, SolverConfig())
    with pytest.raises(SolverError):
        solve_navier_stokes(channel, None, SolverConfig(R=1.0), initial=other)


@pytest.mark.parametrize("kwargs", [dict(nu=0.0), dict(R=-1.0), dict(newton_max_iters=0), dict(bc="periodic")])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_unused_rhs_system():
    sys = LinearSystem(sp.csr_matrix(np.diag([2.0, 4.0])), np.array([2.0, 4.0]))
    assert np.allclose(sparse_lu_solve(sys), [1.0, 1.0])
