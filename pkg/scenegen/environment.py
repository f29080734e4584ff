"""Static indoor environments and their randomized appearance.

An environment is described by a YAML manifest::

    id: living_room_01
    floor_height: 0.0
    bounds: {min: [0, 0, 0], max: [6, 5, 2.7]}   # optional, else mesh bounds
    meshes:
      - {path: meshes/room.stl, label: wall}
      - {box: {min: [0, 0, -0.05], max: [6, 5, 0]}, label: floor}
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from geomesh.mesh import Aabb, TriangleMesh, box_mesh, quad_mesh
from geomesh.stl import load_stl
from utils.errors import DataError, UsageError
from utils.seeding import stream

logger = logging.getLogger(__name__)

FLOOR_LABEL = "floor"


class BadRange(UsageError):
    code = "BAD_RANGE"


class ManifestError(DataError):
    code = "BAD_MANIFEST"


@dataclass(frozen=True, eq=False)
class LabeledMesh:
    mesh: TriangleMesh
    label: str


@dataclass(frozen=True, eq=False)
class Environment:
    meshes: tuple[LabeledMesh, ...]
    bounds: Aabb
    floor_height: float
    manifest_id: str

    def __post_init__(self):
        object.__setattr__(self, "meshes", tuple(self.meshes))
        if not any(m.label == FLOOR_LABEL for m in self.meshes):
            raise ManifestError(f"environment '{self.manifest_id}' has no mesh labelled '{FLOOR_LABEL}'")
        for labeled in self.meshes:
            if labeled.mesh.is_empty:
                continue
            if not self.bounds.contains_points(labeled.mesh.vertices, tol=1e-9):
                raise ManifestError(
                    f"mesh '{labeled.mesh.name}' of environment '{self.manifest_id}' leaves the bounds"
                )

    def union(self, exclude_labels: Sequence[str] = ()) -> TriangleMesh:
        """All static meshes merged into one, optionally skipping some labels."""
        parts = [m.mesh for m in self.meshes if m.label not in exclude_labels and not m.mesh.is_empty]
        return TriangleMesh.concatenate(parts, name=self.manifest_id)

    def obstacles(self) -> TriangleMesh:
        """Every static mesh except the floor, which assets legitimately stand on."""
        return self.union(exclude_labels=(FLOOR_LABEL,))

    @property
    def triangle_count(self) -> int:
        return sum(m.mesh.triangle_count for m in self.meshes)


def box_room(size: Sequence[float] = (10.0, 10.0, 3.0), manifest_id: str = "box_room") -> Environment:
    """Empty rectangular room spanning ``[0, size]`` with inward-facing quads."""
    sx, sy, sz = (float(v) for v in size)
    meshes = [
        LabeledMesh(quad_mesh([[0, 0, 0], [sx, 0, 0], [sx, sy, 0], [0, sy, 0]], "floor"), FLOOR_LABEL),
        LabeledMesh(quad_mesh([[0, 0, sz], [0, sy, sz], [sx, sy, sz], [sx, 0, sz]], "ceiling"), "ceiling"),
        LabeledMesh(quad_mesh([[0, 0, 0], [0, 0, sz], [sx, 0, sz], [sx, 0, 0]], "wall_south"), "wall"),
        LabeledMesh(quad_mesh([[0, sy, 0], [sx, sy, 0], [sx, sy, sz], [0, sy, sz]], "wall_north"), "wall"),
        LabeledMesh(quad_mesh([[0, 0, 0], [0, sy, 0], [0, sy, sz], [0, 0, sz]], "wall_west"), "wall"),
        LabeledMesh(quad_mesh([[sx, 0, 0], [sx, 0, sz], [sx, sy, sz], [sx, sy, 0]], "wall_east"), "wall"),
    ]
    return Environment(tuple(meshes), Aabb([0, 0, 0], [sx, sy, sz]), 0.0, manifest_id)


def _load_manifest_mesh(entry: dict, base_dir: Path, index: int) -> LabeledMesh:
    label = entry.get("label")
    if not isinstance(label, str):
        raise ManifestError(f"mesh entry {index} needs a text 'label'")
    if "path" in entry:
        mesh = load_stl(base_dir / entry["path"])
    elif "box" in entry:
        box = entry["box"]
        mesh = box_mesh(box["min"], box["max"], name=f"box_{index}")
    else:
        raise ManifestError(f"mesh entry {index} needs 'path' or 'box'")
    return LabeledMesh(mesh, label)


def load_environment(path: str | Path) -> Environment:
    path = Path(path)
    try:
        manifest = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ManifestError(f"cannot read environment manifest {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ManifestError(f"environment manifest {path} is not valid YAML: {e}") from e
    if not isinstance(manifest, dict) or "meshes" not in manifest:
        raise ManifestError(f"environment manifest {path} must be a mapping with 'meshes'")

    meshes = tuple(_load_manifest_mesh(entry, path.parent, i) for i, entry in enumerate(manifest["meshes"]))
    if "bounds" in manifest:
        bounds = Aabb(manifest["bounds"]["min"], manifest["bounds"]["max"])
    else:
        non_empty = [m.mesh.bounds() for m in meshes if not m.mesh.is_empty]
        if not non_empty:
            raise ManifestError(f"environment manifest {path} has no geometry and no bounds")
        bounds = non_empty[0]
        for other in non_empty[1:]:
            bounds = bounds.union(other)
    env = Environment(
        meshes=meshes,
        bounds=bounds,
        floor_height=float(manifest.get("floor_height", 0.0)),
        manifest_id=str(manifest.get("id", path.stem)),
    )
    logger.info(f"Loaded environment '{env.manifest_id}' with {len(meshes)} meshes, {env.triangle_count} triangles")
    return env


@dataclass(frozen=True)
class AppearanceRanges:
    texture_count: int = 16
    light_color_min: tuple[float, float, float] = (0.6, 0.6, 0.6)
    light_color_max: tuple[float, float, float] = (1.0, 1.0, 1.0)
    intensity_min: float = 0.5
    intensity_max: float = 1.5

    def validate(self) -> None:
        if self.texture_count < 1:
            raise BadRange(f"texture_count must be at least 1, got {self.texture_count}")
        lo = np.asarray(self.light_color_min, dtype=np.float64)
        hi = np.asarray(self.light_color_max, dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,):
            raise BadRange("light color bounds must be RGB triples")
        if np.any(lo > hi) or np.any(lo < 0) or np.any(hi > 1):
            raise BadRange(f"light color range {lo.tolist()}..{hi.tolist()} must satisfy 0 <= min <= max <= 1")
        if self.intensity_min > self.intensity_max or self.intensity_min < 0:
            raise BadRange(f"intensity range [{self.intensity_min}, {self.intensity_max}] is not well formed")


@dataclass(frozen=True, eq=False)
class AppearanceRandomization:
    texture_ids: tuple[int, ...]
    light_color: tuple[float, float, float]
    light_intensity: float

    def to_dict(self) -> dict:
        return {
            "texture_ids": list(self.texture_ids),
            "light_color": list(self.light_color),
            "light_intensity": self.light_intensity,
        }


def randomize_environment(env: Environment, seed: int, ranges: Optional[AppearanceRanges] = None) -> AppearanceRandomization:
    """Per-mesh texture ids plus one light color and intensity, fixed by ``(seed, env.manifest_id)``."""
    ranges = ranges or AppearanceRanges()
    ranges.validate()
    rng = stream(seed, "appearance", env.manifest_id)
    texture_ids = tuple(int(i) for i in rng.integers(0, ranges.texture_count, size=len(env.meshes)))
    color = rng.uniform(ranges.light_color_min, ranges.light_color_max)
    intensity = rng.uniform(ranges.intensity_min, ranges.intensity_max)
    return AppearanceRandomization(
        texture_ids=texture_ids,
        light_color=tuple(float(c) for c in color),
        light_intensity=float(intensity),
    )
