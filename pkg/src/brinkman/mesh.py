"""Conforming triangle meshes of channels with obstacles.

Boundary facets carry an integer tag: ``INFLOW``, ``OUTFLOW`` and ``WALL`` for
the outer boundary, and ``-j`` for the boundary of obstacle ``j`` (only present
on fluid submeshes). Triangles carry a region label: ``0`` for fluid and
``j >= 1`` for obstacle ``j``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INFLOW = 1
OUTFLOW = 2
WALL = 3
FLUID = 0

_TAG_NAMES = {INFLOW: "inflow", OUTFLOW: "outflow", WALL: "wall"}


class MeshError(ValueError):
    pass


def obstacle_boundary(j: int) -> int:
    """Facet tag of the boundary of obstacle ``j``."""
    if j < 1:
        raise ValueError(f"obstacle ids start at 1, got {j}")
    return -j


def tag_name(tag: int) -> str:
    if tag in _TAG_NAMES:
        return _TAG_NAMES[tag]
    if tag < 0:
        return f"obstacle_boundary_{-tag}"
    raise MeshError(f"unknown boundary tag {tag}")


def region_name(region: int) -> str:
    return "fluid" if region == FLUID else f"obstacle_{region}"


def signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0, p1, p2 = (vertices[triangles[:, k]] for k in range(3))
    d1 = p1 - p0
    d2 = p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def unique_edges(triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lexicographically sorted undirected edges and the triangle-to-edge map.

    Local edge ``k`` of a triangle joins local vertices ``k`` and ``(k+1) % 3``.
    """
    local = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 3, 2)
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    return edges, inverse.reshape(-1, 3)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangle mesh with tagged boundary facets and region labels.

    Construction normalizes triangles to counterclockwise order and orients
    every boundary facet so that its triangle lies on the left, then validates
    conformity.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    facets: np.ndarray
    facet_tags: np.ndarray
    regions: np.ndarray

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=float).reshape(-1, 2)
        triangles = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        facets = np.array(self.facets, dtype=np.int64).reshape(-1, 2)
        facet_tags = np.array(self.facet_tags, dtype=np.int64).reshape(-1)
        regions = np.array(self.regions, dtype=np.int64).reshape(-1)
        if not np.all(np.isfinite(vertices)):
            raise MeshError("non-finite vertex coordinates")
        if len(triangles) == 0:
            raise MeshError("mesh has no triangles")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise MeshError("triangle references a missing vertex")
        if len(facet_tags) != len(facets) or len(regions) != len(triangles):
            raise MeshError("tag array length mismatch")

        area = signed_areas(vertices, triangles)
        bad = np.flatnonzero(area == 0.0)
        if len(bad):
            raise MeshError(f"zero-area triangle {bad[0]}")
        flip = area < 0
        triangles[flip] = triangles[flip][:, [0, 2, 1]]

        edges, tri_edges = unique_edges(triangles)
        count = np.bincount(tri_edges.ravel(), minlength=len(edges))
        if np.any(count > 2):
            raise MeshError("non-manifold edge shared by more than two triangles")
        boundary = np.flatnonzero(count == 1)

        nv = len(vertices)
        edge_key = edges[:, 0] * nv + edges[:, 1]
        fsorted = np.sort(facets, axis=1)
        fkey = fsorted[:, 0] * nv + fsorted[:, 1]
        pos = np.searchsorted(edge_key, fkey)
        pos = np.minimum(pos, len(edge_key) - 1)
        missing = edge_key[pos] != fkey
        if np.any(missing):
            raise MeshError(f"dangling edge: facet {np.flatnonzero(missing)[0]} is not a triangle edge")
        if np.any(count[pos] != 1):
            raise MeshError("boundary facet lies on an interior edge")
        if len(np.unique(fkey)) != len(fkey):
            raise MeshError("duplicate boundary facet")
        if len(fkey) != len(boundary):
            raise MeshError("non-conforming connectivity: untagged boundary edge")
        for t in np.unique(facet_tags):
            tag_name(int(t))

        ids = np.unique(regions[regions != FLUID])
        if np.any(regions < 0):
            raise MeshError("negative region label")
        if len(ids) and not np.array_equal(ids, np.arange(1, len(ids) + 1)):
            raise MeshError(f"obstacle ids must be contiguous from 1, got {ids.tolist()}")

        # orient each facet so that its triangle is on the left (outward normal to the right)
        owner = np.empty(len(edges), dtype=np.int64)
        owner[tri_edges.ravel()] = np.repeat(np.arange(len(triangles)), 3)
        local = np.empty(len(edges), dtype=np.int64)
        local[tri_edges.ravel()] = np.tile(np.arange(3), len(triangles))
        t = owner[pos]
        k = local[pos]
        start = triangles[t, k]
        end = triangles[t, (k + 1) % 3]
        facets = np.stack([start, end], axis=1)

        for name, arr in [("vertices", vertices), ("triangles", triangles), ("facets", facets),
                          ("facet_tags", facet_tags), ("regions", regions)]:
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_obstacles(self) -> int:
        return int(self.regions.max(initial=0))

    def areas(self) -> np.ndarray:
        return signed_areas(self.vertices, self.triangles)

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return unique_edges(self.triangles)

    def with_regions(self, regions) -> "Mesh":
        return Mesh(self.vertices, self.triangles, self.facets, self.facet_tags, regions)

    def same_as(self, other: "Mesh") -> bool:
        """Bit-exact equality of geometry, connectivity and tags."""
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("vertices", "triangles", "facets", "facet_tags", "regions")
        )


def euler_characteristic(mesh: Mesh) -> int:
    edges, _ = mesh.edges()
    return mesh.n_vertices - len(edges) + mesh.n_triangles


def boundary_loops(mesh: Mesh) -> int:
    """Number of closed boundary curves, from the facet graph."""
    parent = np.arange(mesh.n_vertices)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in mesh.facets:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    on_boundary = np.unique(mesh.facets)
    return len({find(v) for v in on_boundary})


def check_euler(mesh: Mesh, holes: int | None = None) -> int:
    """Assert V - E + T = 1 - holes for a connected planar mesh.

    With ``holes=None`` the hole count is taken from the boundary loops.
    Returns the number of holes.
    """
    if holes is None:
        holes = boundary_loops(mesh) - 1
    chi = euler_characteristic(mesh)
    if chi != 1 - holes:
        raise MeshError(f"Euler check failed: V - E + T = {chi}, expected {1 - holes}")
    return holes


def generate_channel_mesh(lx_min: float, lx_max: float, ly_min: float, ly_max: float,
                          rect_obstacles=(), h: float = 0.05) -> Mesh:
    """Structured right-diagonal triangulation of a rectangle.

    ``rect_obstacles`` holds ``(xmin, xmax, ymin, ymax)`` tuples (or objects
    with those attributes). Their sides must fall on grid lines; the cells
    they cover are labelled ``1, 2, ...`` in the order given.
    """
    if not h > 0:
        raise MeshError(f"mesh size must be positive, got {h}")
    if not (lx_max > lx_min and ly_max > ly_min):
        raise MeshError("empty channel")
    nx = max(1, int(np.ceil((lx_max - lx_min) / h - 1e-9)))
    ny = max(1, int(np.ceil((ly_max - ly_min) / h - 1e-9)))
    xs = np.linspace(lx_min, lx_max, nx + 1)
    ys = np.linspace(ly_min, ly_max, ny + 1)
    tol = 1e-12 * np.hypot(lx_max - lx_min, ly_max - ly_min)

    def snap(value, grid, lo, hi):
        if value < lo - tol or value > hi + tol:
            raise MeshError(f"rectangle side {value} lies outside the channel")
        i = int(np.argmin(np.abs(grid - value)))
        if abs(grid[i] - value) > tol:
            raise MeshError(f"rectangle side {value} is not on a grid line (spacing {grid[1] - grid[0]})")
        return i

    cells = np.zeros((ny, nx), dtype=np.int64)
    for j, rect in enumerate(rect_obstacles, start=1):
        if hasattr(rect, "xmin"):
            rect = (rect.xmin, rect.xmax, rect.ymin, rect.ymax)
        x0, x1, y0, y1 = rect
        i0, i1 = snap(x0, xs, lx_min, lx_max), snap(x1, xs, lx_min, lx_max)
        k0, k1 = snap(y0, ys, ly_min, ly_max), snap(y1, ys, ly_min, ly_max)
        if i1 <= i0 or k1 <= k0:
            raise MeshError(f"rectangle {rect} covers no cells")
        if np.any(cells[k0:k1, i0:i1]):
            raise MeshError(f"rectangle {rect} overlaps another obstacle")
        cells[k0:k1, i0:i1] = j

    X, Y = np.meshgrid(xs, ys)
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[:-1, 1:].ravel()
    v01 = idx[1:, :-1].ravel()
    v11 = idx[1:, 1:].ravel()
    triangles = np.stack([np.stack([v00, v10, v11], 1), np.stack([v00, v11, v01], 1)], 1).reshape(-1, 3)
    regions = np.repeat(cells.ravel(), 2)

    bottom = np.stack([idx[0, :-1], idx[0, 1:]], 1)
    right = np.stack([idx[:-1, -1], idx[1:, -1]], 1)
    top = np.stack([idx[-1, 1:], idx[-1, :-1]], 1)
    left = np.stack([idx[1:, 0], idx[:-1, 0]], 1)
    facets = np.concatenate([bottom, right, top, left])
    tags = np.concatenate([np.full(nx, WALL), np.full(ny, OUTFLOW), np.full(nx, WALL), np.full(ny, INFLOW)])
    return Mesh(vertices, triangles, facets, tags, regions)


def extract_fluid_submesh(mesh: Mesh) -> tuple[Mesh, np.ndarray]:
    """Fluid-only submesh and the map from submesh vertices to parent vertices.

    Edges between fluid and obstacle ``j`` triangles become facets tagged
    ``obstacle_boundary(j)``. Outer facets owned by obstacle triangles are dropped.
    """
    fluid = mesh.regions == FLUID
    if fluid.all():
        return mesh.with_regions(mesh.regions), np.arange(mesh.n_vertices)
    if not fluid.any():
        raise MeshError("mesh has no fluid triangles")

    edges, tri_edges = mesh.edges()
    ne = len(edges)
    fluid_owner = np.zeros(ne, dtype=bool)
    fluid_owner[tri_edges[fluid].ravel()] = True
    obstacle_of = np.zeros(ne, dtype=np.int64)
    obst_tris = np.flatnonzero(~fluid)
    obstacle_of[tri_edges[obst_tris].ravel()] = np.repeat(mesh.regions[obst_tris], 3)

    nv = mesh.n_vertices
    edge_key = edges[:, 0] * nv + edges[:, 1]
    fs = np.sort(mesh.facets, axis=1)
    fpos = np.searchsorted(edge_key, fs[:, 0] * nv + fs[:, 1])
    keep = fluid_owner[fpos]

    interface = np.flatnonzero(fluid_owner & (obstacle_of > 0))
    parent_facets = np.concatenate([mesh.facets[keep], edges[interface]])
    parent_tags = np.concatenate([mesh.facet_tags[keep], -obstacle_of[interface]])

    tris = mesh.triangles[fluid]
    vmap = np.unique(tris)
    inv = np.full(nv, -1, dtype=np.int64)
    inv[vmap] = np.arange(len(vmap))
    sub = Mesh(mesh.vertices[vmap], inv[tris], inv[parent_facets], parent_tags,
               np.zeros(len(tris), dtype=np.int64))
    return sub, vmap
