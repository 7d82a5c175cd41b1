"""Run configuration: presets, flat key-value config files, mesh sources."""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .mesh import Mesh, generate_channel_mesh
from .msh import read_manifest, read_msh

CHANNEL = (-2.0, 2.0, -1.0, 1.0)
RECT_OBSTACLE = (-1.1, -0.9, 0.4, 1.0)
DISK_OBSTACLE = (1.0, 0.5, 0.3)
PRESETS = ("paper-channel", "rect-channel", "channel")
# committed body-fitted meshes of the two-obstacle geometry, keyed by mesh size
PAPER_FIXTURES = {0.05: "paper_channel.msh", 0.2: "paper_channel_coarse.msh"}


class ConfigError(ValueError):
    pass


def data_path(name: str) -> Path:
    return Path(str(resources.files("brinkman") / "data" / name))


def fixture_manifest() -> dict:
    return {e["file"]: e for e in read_manifest(data_path("manifest.jsonl"))}


def load_fixture(name: str) -> Mesh:
    """Read a committed fixture and check it against its manifest entry."""
    mesh = read_msh(data_path(name))
    entry = fixture_manifest()[name]
    got = (mesh.n_vertices, mesh.n_triangles, len(mesh.facets), int(np.count_nonzero(mesh.regions)))
    want = (entry["vertices"], entry["triangles"], entry["boundary_facets"], entry["obstacle_triangles"])
    if got != want:
        raise ConfigError(f"fixture {name} does not match its manifest: {got} != {want}")
    return mesh


def read_flat_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment. Keys mirror CLI flag names."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def r_ladder(rmin: float, rmax: float, rsteps: int | None = None) -> tuple[float, ...]:
    """Penalty values from ``rmin`` to ``rmax``; one per decade unless ``rsteps`` is given."""
    if not (0 < rmin <= rmax):
        raise ConfigError(f"need 0 < rmin <= rmax, got {rmin}, {rmax}")
    if rsteps is None:
        decades = int(round(np.log10(rmax / rmin)))
        if not np.isclose(rmin * 10.0 ** decades, rmax):
            raise ConfigError("rmax/rmin is not a power of ten; pass --rsteps")
        return tuple(float(rmin * 10.0 ** k) for k in range(decades + 1))
    if rsteps < 1:
        raise ConfigError("rsteps must be at least 1")
    return tuple(float(r) for r in np.geomspace(rmin, rmax, rsteps))


@dataclass
class RunConfig:
    equation: str = "stokes"
    R: float = 0.0
    rmin: float = 1.0
    rmax: float = 1e10
    rsteps: int | None = None
    nu: float = 1.0
    U: float = 100.0
    bc: str = "mixed"
    scenario: str = "penalized"
    mesh: Path | None = None
    preset: str | None = None
    h: float | None = None
    out: Path = field(default_factory=lambda: Path("."))

    def __post_init__(self):
        if self.mesh is not None and self.preset is not None:
            raise ConfigError("give either --mesh or --preset, not both")
        if self.mesh is None and self.preset is None:
            self.preset = "paper-channel"
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {PRESETS}")

    @property
    def R_values(self) -> tuple[float, ...]:
        return r_ladder(self.rmin, self.rmax, self.rsteps)

    def load_mesh(self) -> Mesh:
        if self.mesh is not None:
            return read_msh(self.mesh)
        h = 0.05 if self.h is None else self.h
        if self.preset == "paper-channel":
            key = next((k for k in PAPER_FIXTURES if np.isclose(k, h)), None)
            if key is None:
                raise ConfigError(f"paper-channel fixtures exist for h in {sorted(PAPER_FIXTURES)}; "
                                  "use --preset rect-channel for other sizes")
            return load_fixture(PAPER_FIXTURES[key])
        rects = [RECT_OBSTACLE] if self.preset == "rect-channel" else []
        return generate_channel_mesh(*CHANNEL, rects, h)
