"""Gmsh MSH 2.2 ASCII reading and writing, plus the JSON-lines fixture manifest."""
from __future__ import annotations

import json
import re
import shlex
from pathlib import Path

import numpy as np

from .mesh import FLUID, INFLOW, OUTFLOW, WALL, Mesh, MeshError, boundary_loops, region_name, tag_name

LINE, TRIANGLE = 1, 2

# physical ids used by write_msh and assumed by parse_msh unless names or a map say otherwise
CANONICAL_BOUNDARY_IDS = {INFLOW: 1, OUTFLOW: 2, WALL: 3}
OBSTACLE_BOUNDARY_BASE = 10
REGION_BASE = 100


def canonical_boundary_id(tag: int) -> int:
    return CANONICAL_BOUNDARY_IDS[tag] if tag > 0 else OBSTACLE_BOUNDARY_BASE - tag


def canonical_region_id(region: int) -> int:
    return REGION_BASE + region


def _canonical_maps(boundary_tags, region_tags):
    if boundary_tags is None:
        boundary_tags = {v: k for k, v in CANONICAL_BOUNDARY_IDS.items()}
        boundary_tags.update({OBSTACLE_BOUNDARY_BASE + j: -j for j in range(1, REGION_BASE - OBSTACLE_BOUNDARY_BASE)})
    if region_tags is None:
        region_tags = {REGION_BASE + j: j for j in range(0, 100)}
    return boundary_tags, region_tags


def _name_to_tag(name: str):
    name = name.strip().lower()
    fixed = {"inflow": ("line", INFLOW), "outflow": ("line", OUTFLOW), "wall": ("line", WALL),
             "fluid": ("surface", FLUID)}
    if name in fixed:
        return fixed[name]
    m = re.fullmatch(r"obstacle_boundary_(\d+)", name)
    if m:
        return "line", -int(m.group(1))
    m = re.fullmatch(r"obstacle_(\d+)", name)
    if m:
        return "surface", int(m.group(1))
    return None


class _Sections:
    def __init__(self, text: str):
        self.lines = [ln.strip() for ln in text.splitlines()]
        self.sections: dict[str, list[str]] = {}
        i = 0
        while i < len(self.lines):
            ln = self.lines[i]
            if not ln:
                i += 1
                continue
            if not ln.startswith("$") or ln.startswith("$End"):
                raise MeshError(f"malformed section header at line {i + 1}: {ln!r}")
            name = ln[1:]
            end = f"$End{name}"
            try:
                j = self.lines.index(end, i + 1)
            except ValueError:
                raise MeshError(f"malformed section header: ${name} has no {end}") from None
            self.sections[name] = self.lines[i + 1:j]
            i = j + 1

    def get(self, name: str) -> list[str]:
        if name not in self.sections:
            raise MeshError(f"malformed section header: missing ${name}")
        return self.sections[name]


def _count_block(body: list[str], what: str) -> list[str]:
    try:
        n = int(body[0])
    except (IndexError, ValueError):
        raise MeshError(f"malformed {what} count") from None
    rows = body[1:]
    if len(rows) != n:
        raise MeshError(f"{what}: declared {n} entries, found {len(rows)}")
    return rows


def parse_msh(data, boundary_tags=None, region_tags=None) -> Mesh:
    """Parse an MSH 2.2 ASCII mesh.

    ``boundary_tags`` maps physical ids of line elements to facet tags and
    ``region_tags`` maps physical ids of triangles to region labels. When a
    map is omitted, the canonical ids written by :func:`write_msh` apply,
    overridden by ``$PhysicalNames`` entries named ``inflow``, ``outflow``,
    ``wall``, ``obstacle_boundary_<j>``, ``fluid`` or ``obstacle_<j>``.

    Lines tagged as obstacle boundaries that end up interior to the mesh are
    dropped; they are rebuilt by :func:`extract_fluid_submesh`.
    """
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("ascii")
    sec = _Sections(data)

    fmt = sec.get("MeshFormat")
    if not fmt or fmt[0].split()[:2] != ["2.2", "0"]:
        raise MeshError(f"unsupported MeshFormat {fmt[:1]}; only 2.2 ASCII is supported")

    named_b, named_r = {}, {}
    if "PhysicalNames" in sec.sections:
        for row in _count_block(sec.sections["PhysicalNames"], "PhysicalNames"):
            dim, pid, name = shlex.split(row)
            resolved = _name_to_tag(name)
            if resolved is None:
                continue
            kind, tag = resolved
            (named_b if kind == "line" else named_r)[int(pid)] = tag
    default_b, default_r = _canonical_maps(None, None)
    if boundary_tags is None:
        boundary_tags = {**default_b, **named_b}
    if region_tags is None:
        region_tags = {**default_r, **named_r}

    node_rows = _count_block(sec.get("Nodes"), "Nodes")
    ids = np.empty(len(node_rows), dtype=np.int64)
    coords = np.empty((len(node_rows), 2))
    for i, row in enumerate(node_rows):
        parts = row.split()
        if len(parts) != 4:
            raise MeshError(f"malformed node line {row!r}")
        ids[i] = int(parts[0])
        coords[i] = float(parts[1]), float(parts[2])
    index = {int(n): i for i, n in enumerate(ids)}
    if len(index) != len(ids):
        raise MeshError("duplicate node id")

    lines, line_tags, tris, tri_regions = [], [], [], []
    for row in _count_block(sec.get("Elements"), "Elements"):
        parts = [int(p) for p in row.split()]
        etype, ntags = parts[1], parts[2]
        physical = parts[3] if ntags > 0 else 0
        nodes = parts[3 + ntags:]
        try:
            nodes = [index[n] for n in nodes]
        except KeyError as exc:
            raise MeshError(f"element references unknown node {exc.args[0]}") from None
        if etype == LINE and len(nodes) == 2:
            if physical not in boundary_tags:
                raise MeshError(f"unknown physical tag {physical} on line element {parts[0]}")
            lines.append(nodes)
            line_tags.append(boundary_tags[physical])
        elif etype == TRIANGLE and len(nodes) == 3:
            if physical not in region_tags:
                raise MeshError(f"unknown physical tag {physical} on triangle element {parts[0]}")
            tris.append(nodes)
            tri_regions.append(region_tags[physical])
        else:
            raise MeshError(f"unsupported element type {etype} (element {parts[0]})")

    tris = np.array(tris, dtype=np.int64).reshape(-1, 3)
    used = np.unique(tris)
    remap = np.full(len(coords), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    lines = np.array(lines, dtype=np.int64).reshape(-1, 2)
    line_tags = np.array(line_tags, dtype=np.int64)
    if len(lines) and np.any(remap[lines] < 0):
        raise MeshError("dangling edge: line element not attached to any triangle")

    tris = remap[tris]
    lines = remap[lines]
    lines, line_tags = _drop_interior_obstacle_lines(tris, lines, line_tags)
    return Mesh(coords[used], tris, lines, line_tags, tri_regions)


def _drop_interior_obstacle_lines(tris, lines, tags):
    if not len(lines):
        return lines, tags
    s = np.sort(tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    n = int(tris.max()) + 1
    key, count = np.unique(s[:, 0] * n + s[:, 1], return_counts=True)
    ls = np.sort(lines, axis=1)
    lkey = ls[:, 0] * n + ls[:, 1]
    pos = np.minimum(np.searchsorted(key, lkey), len(key) - 1)
    interior = (key[pos] == lkey) & (count[pos] == 2)
    if np.any(interior & (tags > 0)):
        raise MeshError("non-conforming connectivity: outer-boundary line on an interior edge")
    keep = ~interior
    return lines[keep], tags[keep]


def write_msh(mesh: Mesh) -> str:
    """Serialize as MSH 2.2 ASCII with canonical physical ids and names.

    Coordinates are written with 17 significant digits so that a reparse is
    bit-exact.
    """
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat"]
    btags = sorted({int(t) for t in mesh.facet_tags}, key=canonical_boundary_id)
    regions = sorted({int(r) for r in mesh.regions})
    names = [(1, canonical_boundary_id(t), tag_name(t)) for t in btags]
    names += [(2, canonical_region_id(r), region_name(r)) for r in regions]
    out += ["$PhysicalNames", str(len(names))]
    out += [f'{d} {pid} "{name}"' for d, pid, name in names]
    out.append("$EndPhysicalNames")

    out += ["$Nodes", str(mesh.n_vertices)]
    out += [f"{i + 1} {x!r} {y!r} 0" for i, (x, y) in enumerate(mesh.vertices.tolist())]
    out.append("$EndNodes")

    nf = len(mesh.facets)
    out += ["$Elements", str(nf + mesh.n_triangles)]
    for i, ((a, b), t) in enumerate(zip(mesh.facets.tolist(), mesh.facet_tags.tolist())):
        pid = canonical_boundary_id(t)
        out.append(f"{i + 1} {LINE} 2 {pid} {pid} {a + 1} {b + 1}")
    for i, ((a, b, c), r) in enumerate(zip(mesh.triangles.tolist(), mesh.regions.tolist())):
        pid = canonical_region_id(r)
        out.append(f"{nf + i + 1} {TRIANGLE} 2 {pid} {pid} {a + 1} {b + 1} {c + 1}")
    out.append("$EndElements")
    return "\n".join(out) + "\n"


def read_msh(path, **kwargs) -> Mesh:
    return parse_msh(Path(path).read_bytes(), **kwargs)


def save_msh(mesh: Mesh, path) -> None:
    Path(path).write_text(write_msh(mesh))


def manifest_entry(mesh: Mesh, name: str, **extra) -> dict:
    """Counts recorded for a committed mesh, checked again on every load."""
    entry = {
        "file": name,
        "vertices": mesh.n_vertices,
        "triangles": mesh.n_triangles,
        "boundary_facets": len(mesh.facets),
        "obstacle_triangles": int(np.count_nonzero(mesh.regions)),
        "holes": boundary_loops(mesh) - 1,
    }
    entry.update(extra)
    return entry


def write_manifest(entries, path) -> None:
    Path(path).write_text("".join(json.dumps(e, sort_keys=True) + "\n" for e in entries))


def read_manifest(path) -> list[dict]:
    return [json.loads(ln) for ln in Path(path).read_text().splitlines() if ln.strip()]
