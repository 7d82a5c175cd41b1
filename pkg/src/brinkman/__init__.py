"""Brinkman volume penalization for steady Stokes and Navier-Stokes flow around obstacles."""
from .mesh import INFLOW, OUTFLOW, WALL, Mesh, MeshError, extract_fluid_submesh, generate_channel_mesh, obstacle_boundary
from .msh import parse_msh, read_msh, write_msh
from .penalty import AxisAlignedRect, Disk, ObstacleSet, build_penalty_field, contains
from .solver import FlowSolution, NewtonReport, SolverConfig, solve_navier_stokes, solve_stokes, sparse_lu_solve
from .spaces import InflowProfile, Scenario, build_taylor_hood, collect_dirichlet

__version__ = "0.1.0"
