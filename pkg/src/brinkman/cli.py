"""Command-line entry point: ``brinkman {mesh,solve,study}``.

Exit codes: 0 success, 2 bad flags or configuration, 3 solver failure,
4 I/O failure. Failures print one ``error: code=<n> kind=<kind> message=<text>``
line to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .analysis import StudyConfig, StudyError, flux, run_convergence_study, scaled_divergence
from .config import PRESETS, ConfigError, RunConfig, read_flat_config
from .io import format_markdown, solution_field, write_vtk
from .mesh import INFLOW, OUTFLOW, MeshError, check_euler
from .msh import manifest_entry, save_msh, write_manifest
from .penalty import PenaltyError
from .solver import SolverConfig, SolverError, solve_navier_stokes, solve_stokes

EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value file; flags override it")
    p.add_argument("--mesh", type=Path, help="Gmsh MSH 2.2 ASCII mesh")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--h", type=float, help="mesh size for presets (default 0.05)")
    p.add_argument("--out", type=Path, help="output directory (default .)")
    p.add_argument("-v", "--verbose", action="store_true")


def _physics(p: argparse.ArgumentParser) -> None:
    p.add_argument("--equation", choices=("stokes", "navier-stokes"))
    p.add_argument("--nu", type=float)
    p.add_argument("--U", type=float)
    p.add_argument("--bc", choices=("mixed", "dirichlet"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="brinkman", description="Brinkman-penalized Stokes / Navier-Stokes channel flow")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("mesh", help="generate or validate a mesh and write it with a manifest")
    _common(p)

    p = sub.add_parser("solve", help="solve one scenario and write VTK + diagnostics")
    _common(p)
    _physics(p)
    p.add_argument("--R", type=float)
    p.add_argument("--scenario", choices=("penalized", "reference"))

    p = sub.add_parser("study", help="penalty sweep with error and rate tables")
    _common(p)
    _physics(p)
    p.add_argument("--rmin", type=float)
    p.add_argument("--rmax", type=float)
    p.add_argument("--rsteps", type=int)
    return parser


def _run_config(parser, argv) -> tuple[argparse.Namespace, RunConfig]:
    args = parser.parse_args(argv)
    known = {f.name: f for f in fields(RunConfig)}
    values = {}
    if args.config is not None:
        for key, raw in read_flat_config(args.config).items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = raw
    for key in known:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    typed = {}
    for key, v in values.items():
        if isinstance(v, str):
            if key in ("R", "rmin", "rmax", "nu", "U", "h"):
                v = float(v)
            elif key == "rsteps":
                v = int(v)
            elif key in ("mesh", "out"):
                v = Path(v)
        typed[key] = v
    return args, RunConfig(**typed)


def _cmd_mesh(run: RunConfig) -> int:
    mesh = run.load_mesh()
    holes = check_euler(mesh)
    run.out.mkdir(parents=True, exist_ok=True)
    name = run.mesh.name if run.mesh is not None else f"{run.preset}.msh"
    save_msh(mesh, run.out / name)
    entry = manifest_entry(mesh, name)
    write_manifest([entry], run.out / "manifest.jsonl")
    print(json.dumps({**entry, "euler_ok": True, "holes": holes}, sort_keys=True))
    return 0


def _cmd_solve(run: RunConfig) -> int:
    mesh = run.load_mesh()
    cfg = SolverConfig(nu=run.nu, U=run.U, R=run.R, bc=run.bc)
    report = None
    if run.equation == "navier-stokes":
        sol, report = solve_navier_stokes(mesh, None, cfg, run.scenario)
    else:
        sol = solve_stokes(mesh, None, cfg, run.scenario)
    run.out.mkdir(parents=True, exist_ok=True)
    stem = f"{run.equation}_{run.scenario}" + (f"_R{run.R:g}" if run.scenario == "penalized" else "")
    write_vtk(solution_field(sol), run.out / f"{stem}.vtk")
    diag = {
        "equation": run.equation, "scenario": run.scenario, "R": sol.R, "nu": run.nu, "U": run.U,
        "flux_inflow": flux(sol, INFLOW), "flux_outflow": flux(sol, OUTFLOW),
        "max_scaled_divergence": scaled_divergence(sol),
    }
    if report is not None:
        diag["newton_iterations"] = report.iterations
        diag["newton_residuals"] = list(report.residual_norms)
    (run.out / f"{stem}.json").write_text(json.dumps(diag, indent=2, sort_keys=True) + "\n")
    print(f"flux inflow={diag['flux_inflow']:.10g} outflow={diag['flux_outflow']:.10g} "
          f"balance={diag['flux_inflow'] + diag['flux_outflow']:.3e}")
    print(f"wrote {run.out / (stem + '.vtk')}")
    return 0


def _cmd_study(run: RunConfig) -> int:
    mesh = run.load_mesh()
    run.out.mkdir(parents=True, exist_ok=True)
    stem = f"study_{run.equation}"
    cfg = StudyConfig(mesh, run.equation, run.R_values, run.nu, run.U, run.bc,
                      csv_path=run.out / f"{stem}.csv", markdown_path=run.out / f"{stem}.md")
    records = run_convergence_study(cfg)
    print(format_markdown(records, run.equation), end="")
    return 0


def _fail(code: int, kind: str, message) -> int:
    text = " ".join(str(message).split())
    print(f"error: code={code} kind={kind} message={text}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args, run = _run_config(parser, argv)
    except (UsageError, ConfigError) as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except ValueError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except OSError as exc:
        return _fail(EXIT_IO, "io", exc)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    commands = {"mesh": _cmd_mesh, "solve": _cmd_solve, "study": _cmd_study}
    try:
        return commands[args.command](run)
    except ConfigError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except StudyError as exc:
        return _fail(EXIT_SOLVER, "solver", exc)
    except (SolverError, PenaltyError) as exc:
        return _fail(EXIT_SOLVER, "solver", exc)
    except MeshError as exc:
        return _fail(EXIT_IO, "mesh", exc)
    except OSError as exc:
        return _fail(EXIT_IO, "io", exc)


if __name__ == "__main__":
    sys.exit(main())
