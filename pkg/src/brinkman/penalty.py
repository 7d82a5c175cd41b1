"""Obstacle sets and the piecewise-constant penalty ``R * indicator(obstacle)``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import FLUID, Mesh

_TOL = 1e-12


class PenaltyError(ValueError):
    pass


@dataclass(frozen=True)
class AxisAlignedRect:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(f"rectangle has no area: {self}")

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        tol = _TOL * max(1.0, abs(self.xmin), abs(self.xmax), abs(self.ymin), abs(self.ymax))
        return ((x >= self.xmin - tol) & (x <= self.xmax + tol)
                & (y >= self.ymin - tol) & (y <= self.ymax + tol))

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disk radius must be positive, got {self.radius}")

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        r2 = (pts[..., 0] - self.cx) ** 2 + (pts[..., 1] - self.cy) ** 2
        return r2 <= self.radius ** 2 * (1 + _TOL)

    @property
    def area(self) -> float:
        return np.pi * self.radius ** 2


@dataclass(frozen=True)
class ObstacleSet:
    """Either a list of geometric primitives or the obstacle regions of a mesh.

    With ``mesh`` set, membership is read from the mesh region labels.
    """

    primitives: tuple = ()
    mesh: Mesh | None = field(default=None, compare=False)

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "ObstacleSet":
        return cls(mesh=mesh)

    @property
    def uses_regions(self) -> bool:
        return self.mesh is not None

    def labels(self, pts) -> np.ndarray:
        """1-based index of the first primitive containing each point, else 0."""
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[:-1], dtype=np.int64)
        for j, prim in enumerate(self.primitives, start=1):
            out = np.where((out == 0) & prim.contains(pts), j, out)
        return out


def contains(obstacles: ObstacleSet, p) -> np.ndarray | bool:
    """Closed-set membership of one point or an array of points."""
    pts = np.asarray(p, dtype=float)
    if obstacles.uses_regions:
        res = _in_region_triangles(obstacles.mesh, pts.reshape(-1, 2)).reshape(pts.shape[:-1])
    else:
        res = obstacles.labels(pts) > 0
    return bool(res) if res.ndim == 0 else res


def _in_region_triangles(mesh: Mesh, pts: np.ndarray) -> np.ndarray:
    tris = mesh.triangles[mesh.regions != FLUID]
    out = np.zeros(len(pts), dtype=bool)
    if not len(tris):
        return out
    a, b, c = (mesh.vertices[tris[:, k]] for k in range(3))
    scale = _TOL * max(1.0, float(np.abs(mesh.vertices).max())) ** 2

    def side(p, q, r):
        return (q[:, 0] - p[:, 0]) * (r[:, 1] - p[:, 1]) - (q[:, 1] - p[:, 1]) * (r[:, 0] - p[:, 0])

    for i, x in enumerate(pts):
        xx = np.broadcast_to(x, a.shape)
        inside = (side(a, b, xx) >= -scale) & (side(b, c, xx) >= -scale) & (side(c, a, xx) >= -scale)
        out[i] = inside.any()
    return out


@dataclass(frozen=True, eq=False)
class PenaltyField:
    R: float
    indicator: np.ndarray

    @property
    def values(self) -> np.ndarray:
        """Per-triangle penalty: exactly ``R`` on obstacle triangles and 0 elsewhere."""
        return np.where(self.indicator, self.R, 0.0)


def classify_triangles(mesh: Mesh, obstacles: ObstacleSet) -> np.ndarray:
    """Per-triangle obstacle label (0 for fluid) from centroids.

    Rejects triangles whose centroid classification disagrees with the
    classification of all three vertices, i.e. triangles straddling an
    obstacle boundary.
    """
    if obstacles.uses_regions:
        if obstacles.mesh is not mesh and obstacles.mesh.n_triangles != mesh.n_triangles:
            raise PenaltyError("obstacle regions belong to a different mesh")
        return np.array(obstacles.mesh.regions)
    labels = obstacles.labels(mesh.centroids())
    corner = obstacles.labels(mesh.vertices)[mesh.triangles]
    all_in = np.all(corner > 0, axis=1)
    bad = np.flatnonzero((labels > 0) != all_in)
    if len(bad):
        raise PenaltyError(f"triangle {bad[0]} straddles an obstacle boundary; mesh does not conform")
    return labels


def build_penalty_field(mesh: Mesh, obstacles: ObstacleSet | None, R: float) -> PenaltyField:
    if not R >= 0:
        raise PenaltyError(f"penalty must be non-negative, got {R}")
    if obstacles is None:
        obstacles = ObstacleSet.from_mesh(mesh)
    labels = classify_triangles(mesh, obstacles)
    indicator = labels > 0
    indicator.setflags(write=False)
    return PenaltyField(float(R), indicator)
