#!/usr/bin/env python3
"""Generate the committed body-fitted fixture meshes (rectangle + disk obstacles).

Needs the ``triangle`` package (Shewchuk's Triangle); it is only used here,
the package itself reads the resulting MSH files.

    python scripts/make_fixtures.py
"""
import argparse
from pathlib import Path

import numpy as np
import triangle

from brinkman.mesh import INFLOW, OUTFLOW, WALL, Mesh, check_euler, unique_edges
from brinkman.msh import manifest_entry, parse_msh, save_msh, write_manifest

DATA = Path(__file__).resolve().parents[1] / "src" / "brinkman" / "data"
RECT = (-1.1, -0.9, 0.4, 1.0)
DISK = (1.0, 0.5, 0.3)


def subdivide(verts, segs, h):
    """Split every input segment into pieces no longer than ``h``."""
    pts = [tuple(v) for v in verts]
    out = []
    for a, b in segs:
        n = max(1, int(np.ceil(np.linalg.norm(verts[b] - verts[a]) / h - 1e-9)))
        chain = [a]
        for k in range(1, n):
            pts.append(tuple(verts[a] + (verts[b] - verts[a]) * k / n))
            chain.append(len(pts) - 1)
        chain.append(b)
        out += list(zip(chain[:-1], chain[1:]))
    return np.array(pts), np.array(out)


def channel_with_obstacles(h):
    x0, x1, y0, y1 = RECT
    outer = [(-2, -1), (2, -1), (2, 1), (x1, 1), (x0, 1), (-2, 1)]
    verts = list(outer)
    segs = [(i, (i + 1) % len(outer)) for i in range(len(outer))]
    base = len(verts)
    verts += [(x0, y0), (x1, y0)]
    # rectangle: (x0,1) -> (x0,y0) -> (x1,y0) -> (x1,1)
    segs += [(4, base), (base, base + 1), (base + 1, 3)]
    cx, cy, r = DISK
    n = int(np.ceil(2 * np.pi * r / h))
    t = 2 * np.pi * np.arange(n) / n
    base = len(verts)
    verts += list(zip(cx + r * np.cos(t), cy + r * np.sin(t)))
    segs += [(base + i, base + (i + 1) % n) for i in range(n)]
    verts, segs = subdivide(np.array(verts, float), segs, h)
    # max-area constraint chosen so that h = 0.05 gives about 8400 triangles
    area = 0.6 * h * h
    regions = [[-1.5, 0.0, 0, area], [-1.0, 0.7, 1, area], [cx, cy, 2, area]]
    out = triangle.triangulate(dict(vertices=verts, segments=segs,
                                    regions=regions), "pq30AaY")
    tris = out["triangles"]
    labels = out["triangle_attributes"].ravel().astype(int)

    edges, tri_edges = unique_edges(tris)
    count = np.bincount(tri_edges.ravel(), minlength=len(edges))
    bnd = edges[count == 1]
    pts = out["vertices"]
    mid = pts[bnd].mean(axis=1)
    tags = np.full(len(bnd), WALL)
    tags[np.isclose(mid[:, 0], -2.0)] = INFLOW
    tags[np.isclose(mid[:, 0], 2.0)] = OUTFLOW
    return Mesh(pts, tris, bnd, tags, labels)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=DATA)
    args = ap.parse_args()
    entries = []
    for name, h in [("paper_channel.msh", 0.05), ("paper_channel_coarse.msh", 0.2)]:
        mesh = channel_with_obstacles(h)
        path = args.out / name
        save_msh(mesh, path)
        mesh = parse_msh(path.read_bytes())
        check_euler(mesh, 0)
        entries.append(manifest_entry(mesh, name, h=h))
        print(entries[-1])
    write_manifest(entries, args.out / "manifest.jsonl")


if __name__ == "__main__":
    main()
