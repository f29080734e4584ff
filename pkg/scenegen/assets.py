"""Dynamic asset libraries and scene instances.

A human asset is a directory of per-frame STL files plus ``asset.yaml``::

    rate: 30          # frames per second of the clip
    name: walker_03   # optional, defaults to the directory name

A flying-object library is a directory of STL files, one object each.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
import yaml

from geomesh.mesh import Transform, TriangleMesh, box_mesh
from geomesh.stl import load_stl
from scenegen.animation import AnimationTrack
from utils.errors import DataError

logger = logging.getLogger(__name__)

SemanticClass = Literal["human", "flying_object"]

# Pixel class ids used by the ground-truth renderer.
SEMANTIC_CLASS_IDS: dict[str, int] = {"background": 0, "human": 1, "flying_object": 2}


class AssetError(DataError):
    code = "BAD_ASSET"


@dataclass(frozen=True, eq=False)
class HumanAsset:
    """An animated clip: ``mesh`` is frame 0 and ``track`` holds every frame."""

    name: str
    mesh: TriangleMesh
    track: AnimationTrack


@dataclass(frozen=True, eq=False)
class AssetInstance:
    instance_id: int
    semantic_class: SemanticClass
    asset_name: str
    mesh: TriangleMesh
    track: AnimationTrack
    placement: Transform
    texture_id: int = 0

    @property
    def class_id(self) -> int:
        return SEMANTIC_CLASS_IDS[self.semantic_class]

    def to_dict(self) -> dict:
        return {
            "id": self.instance_id,
            "class": self.semantic_class,
            "asset": self.asset_name,
            "texture_id": self.texture_id,
            "placement": {
                "rotation": self.placement.rotation.tolist(),
                "translation": self.placement.translation.tolist(),
                "scale": self.placement.scale,
            },
            "track": self.track.to_dict(),
        }


def load_human_asset(directory: str | Path, duration: float) -> HumanAsset:
    directory = Path(directory)
    meta_path = directory / "asset.yaml"
    try:
        meta = yaml.safe_load(meta_path.read_text(encoding="utf-8")) or {}
    except OSError as e:
        raise AssetError(f"human asset {directory} has no readable asset.yaml: {e}") from e
    frame_paths = sorted(directory.glob("*.stl"))
    if not frame_paths:
        raise AssetError(f"human asset {directory} contains no STL frames")
    frames = [load_stl(p) for p in frame_paths]
    counts = {m.triangle_count for m in frames}
    if len(counts) != 1:
        raise AssetError(f"frames of human asset {directory} disagree on triangle count: {sorted(counts)}")
    stacked = np.stack([m.vertices for m in frames])
    name = str(meta.get("name", directory.name))
    track = AnimationTrack.mesh_sequence(stacked, frames[0].triangles, float(meta.get("rate", 30.0)), duration)
    logger.info(f"Loaded human asset '{name}': {len(frames)} frames, {frames[0].triangle_count} triangles")
    return HumanAsset(name, frames[0].with_vertices(stacked[0]), track)


def load_object_library(directory: str | Path) -> list[TriangleMesh]:
    directory = Path(directory)
    meshes = [load_stl(p) for p in sorted(directory.glob("*.stl"))]
    meshes = [m for m in meshes if not m.is_empty]
    if not meshes:
        raise AssetError(f"flying-object library {directory} contains no usable STL files")
    return meshes


def procedural_human(
    name: str = "box_walker",
    height: float = 1.7,
    width: float = 0.45,
    depth: float = 0.3,
    frames: int = 30,
    rate: float = 30.0,
    sway: float = 0.05,
    duration: float = 60.0,
) -> HumanAsset:
    """Upright box standing on z = 0 that sways sideways over one clip cycle."""
    base = box_mesh([-width / 2, -depth / 2, 0.0], [width / 2, depth / 2, height], name)
    phase = np.linspace(0.0, 2.0 * np.pi, frames, endpoint=False)
    # Only the upper half of the box moves; feet stay planted.
    lean = (base.vertices[:, 2] / height)[None, :] * sway * np.sin(phase)[:, None]
    stacked = np.repeat(base.vertices[None], frames, axis=0)
    stacked[:, :, 1] += lean
    track = AnimationTrack.mesh_sequence(stacked, base.triangles, rate, duration)
    return HumanAsset(name, base, track)


def procedural_object(name: str = "crate", size: float = 0.3) -> TriangleMesh:
    half = size / 2
    return box_mesh([-half, -half, -half], [half, half, half], name)
