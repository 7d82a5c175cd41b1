"""VTK legacy output of flow fields and CSV / markdown convergence tables."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mesh import Mesh

VTK_TRIANGLE = 5
CSV_HEADER = "R,err_l2_obstacle,rate_l2,err_h1,rate_h1"


@dataclass(frozen=True, eq=False)
class VtkField:
    mesh: Mesh
    vectors: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)

    def __post_init__(self):
        nv = self.mesh.n_vertices
        for name, arr in {**self.vectors, **self.scalars}.items():
            if len(arr) != nv:
                raise ValueError(f"point data {name!r} has {len(arr)} entries for {nv} vertices")


def solution_field(sol) -> VtkField:
    """Vertex samples of velocity and pressure plus a per-vertex obstacle indicator."""
    mesh = sol.space.mesh
    nv = mesh.n_vertices
    vel = sol.velocity[:2 * nv].reshape(nv, 2)
    indicator = np.zeros(nv)
    if sol.penalty is not None:
        indicator[np.unique(mesh.triangles[sol.penalty.indicator])] = 1.0
    return VtkField(mesh, {"velocity": vel}, {"pressure": sol.pressure, "penalty_indicator": indicator})


def _num(v: float) -> str:
    return repr(float(v))


def format_vtk(fld: VtkField, title: str = "brinkman flow field") -> str:
    mesh = fld.mesh
    out = ["# vtk DataFile Version 2.0", title.replace("\n", " ")[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
           f"POINTS {mesh.n_vertices} double"]
    out += [f"{_num(x)} {_num(y)} 0" for x, y in mesh.vertices]
    nt = mesh.n_triangles
    out.append(f"CELLS {nt} {4 * nt}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    out.append(f"CELL_TYPES {nt}")
    out += [str(VTK_TRIANGLE)] * nt
    if fld.vectors or fld.scalars:
        out.append(f"POINT_DATA {mesh.n_vertices}")
    for name, arr in fld.vectors.items():
        out.append(f"VECTORS {name} double")
        out += [f"{_num(a)} {_num(b)} 0" for a, b in np.asarray(arr, float)]
    for name, arr in fld.scalars.items():
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [_num(v) for v in np.asarray(arr, float)]
    return "\n".join(out) + "\n"


def write_vtk(fld: VtkField, path) -> None:
    Path(path).write_text(format_vtk(fld))


def read_vtk(path) -> dict:
    """Minimal reader for files written by :func:`write_vtk`, used for validation."""
    tokens = Path(path).read_text().splitlines()
    if not tokens or not tokens[0].startswith("# vtk DataFile"):
        raise ValueError("not a legacy VTK file")
    if tokens[2].strip() != "ASCII" or tokens[3].strip() != "DATASET UNSTRUCTURED_GRID":
        raise ValueError("expected ASCII UNSTRUCTURED_GRID")
    i = 4
    out = {"vectors": {}, "scalars": {}}
    npts = 0
    while i < len(tokens):
        parts = tokens[i].split()
        i += 1
        if not parts:
            continue
        key = parts[0]
        if key == "POINTS":
            npts = int(parts[1])
            out["points"] = np.array([list(map(float, t.split()))[:2] for t in tokens[i:i + npts]])
            i += npts
        elif key == "CELLS":
            n = int(parts[1])
            out["cells"] = np.array([list(map(int, t.split()))[1:] for t in tokens[i:i + n]])
            i += n
        elif key == "CELL_TYPES":
            n = int(parts[1])
            out["cell_types"] = np.array([int(t) for t in tokens[i:i + n]])
            i += n
        elif key == "POINT_DATA":
            if int(parts[1]) != npts:
                raise ValueError("POINT_DATA size differs from POINTS")
        elif key == "VECTORS":
            out["vectors"][parts[1]] = np.array([list(map(float, t.split()))[:2] for t in tokens[i:i + npts]])
            i += npts
        elif key == "SCALARS":
            i += 1  # LOOKUP_TABLE
            out["scalars"][parts[1]] = np.array([float(t) for t in tokens[i:i + npts]])
            i += npts
        else:
            raise ValueError(f"unexpected VTK keyword {key!r}")
    return out


def _fmt(v) -> str:
    return "" if v is None else "%#.6g" % v


def _fmt_md(v) -> str:
    return "-" if v is None else "%#.6g" % v


def format_csv(records) -> str:
    rows = [CSV_HEADER]
    rows += [",".join(_fmt(v) for v in (r.R, r.err_l2_obstacle, r.rate_l2, r.err_h1, r.rate_h1)) for r in records]
    return "\n".join(rows) + "\n"


def format_markdown(records, equation: str | None = None) -> str:
    title = {"stokes": "Stokes", "navier-stokes": "Navier-Stokes"}.get(equation or "", "")
    lines = []
    if title:
        lines += [f"Penalty convergence history, {title} equations.", ""]
    lines += ["| R | L2(obstacle) of u_R: Error | Rate | H1 seminorm of u - u_R: Error | Rate |",
              "|---|---:|---:|---:|---:|"]
    for r in records:
        cells = [_fmt_md(v) for v in (r.R, r.err_l2_obstacle, r.rate_l2, r.err_h1, r.rate_h1)]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def write_table(records, path, format: str = "csv", equation: str | None = None) -> None:
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    if format == "csv":
        text = format_csv(records)
    elif format == "markdown":
        text = format_markdown(records, equation)
    else:
        raise ValueError(f"unknown table format {format!r}")
    Path(path).write_text(text)
