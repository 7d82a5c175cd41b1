#!/usr/bin/env python3
"""Penalty sweeps for Stokes and Navier-Stokes on the committed and generated channel meshes.

Writes one CSV and one markdown table per (mesh, equation) pair and prints the
rates together with least-squares slopes over R in [1e4, 1e8].

    python scripts/run_penalty_study.py --out results
    python scripts/run_penalty_study.py --equation stokes --mesh rect-channel --rmax 1e8
"""
import argparse
import logging
import time
from pathlib import Path

from brinkman.analysis import StudyConfig, fitted_slope, run_convergence_study
from brinkman.config import RunConfig, r_ladder
from brinkman.io import format_markdown

MESHES = {"paper-channel": dict(preset="paper-channel", h=0.05),
          "rect-channel": dict(preset="rect-channel", h=0.05)}


def run(mesh_name, equation, R_values, out: Path):
    mesh = RunConfig(**MESHES[mesh_name]).load_mesh()
    stem = out / f"{mesh_name}_{equation}"
    t0 = time.perf_counter()
    recs = run_convergence_study(StudyConfig(mesh, equation, R_values, csv_path=stem.with_suffix(".csv"),
                                             markdown_path=stem.with_suffix(".md")))
    elapsed = time.perf_counter() - t0
    print(f"## {mesh_name}, {equation} ({mesh.n_triangles} triangles, {elapsed:.1f}s)")
    print(format_markdown(recs, equation))
    sel = [r for r in recs if 1e4 <= r.R <= 1e8]
    if len(sel) >= 2:
        R = [r.R for r in sel]
        print(f"slopes over 1e4..1e8: L2 {fitted_slope(R, [r.err_l2_obstacle for r in sel]):.4f}, "
              f"H1 {fitted_slope(R, [r.err_h1 for r in sel]):.4f}")
    if equation == "navier-stokes":
        print("Newton iterations:", [r.newton_iterations for r in recs])
    print()


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--mesh", choices=sorted(MESHES), action="append")
    ap.add_argument("--equation", choices=("stokes", "navier-stokes"), action="append")
    ap.add_argument("--rmin", type=float, default=1.0)
    ap.add_argument("--rmax", type=float, default=1e10)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    args.out.mkdir(parents=True, exist_ok=True)
    R_values = r_ladder(args.rmin, args.rmax)
    for mesh_name in args.mesh or sorted(MESHES):
        for equation in args.equation or ("stokes", "navier-stokes"):
            run(mesh_name, equation, R_values, args.out)


if __name__ == "__main__":
    main()
