"""Ray-cast ground truth for one camera pose.

One primary ray per pixel center. The nearest surface among the static
environment and every asset instance posed at time ``t`` decides the
pixel's instance id, class id, depth and color. Depth is the z-depth along
the optical axis; misses read ``inf``.

The color layer is a flat-shaded proxy: the surface albedo (from its
texture id) times the scene light times ``|n.l|`` for a headlight at
the camera. Surfaces are two-sided.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from geomesh.bvh import BatchHits, Bvh, build_bvh, ray_cast_batch
from geomesh.mesh import TriangleMesh, Transform
from gtrender.camera import CameraModel, world_rays
from gtrender.masks import BBox, InstanceMask, bbox_from_mask
from scenegen.animation import TIME_TOLERANCE, OutOfRange, instance_mesh_at
from scenegen.scene import Scene
from utils.errors import InvariantViolation

logger = logging.getLogger(__name__)

NEAR_CLIP = 1e-3
DYNAMIC_CACHE_SIZE = 64

_PALETTE_STEPS = np.array([0.6180339887, 0.4142135624, 0.7320508076])


def texture_albedo(texture_ids) -> np.ndarray:
    """Deterministic RGB albedo in ``[0.25, 0.95]`` for each texture id."""
    ids = np.asarray(texture_ids, dtype=np.float64)[..., None] + 1.0
    return 0.25 + 0.7 * np.mod(ids * _PALETTE_STEPS, 1.0)


@dataclass(frozen=True, eq=False)
class RenderLayers:
    """Raw per-pixel layers for a block of image rows."""

    instance: np.ndarray
    depth: np.ndarray
    rgb: np.ndarray


@dataclass(frozen=True, eq=False)
class FrameGroundTruth:
    frame: int
    time: float
    instance_map: np.ndarray
    semantic_map: np.ndarray
    depth: np.ndarray
    rgb: np.ndarray
    boxes: tuple[tuple[int, BBox], ...]
    masks: tuple[tuple[int, InstanceMask], ...]

    @property
    def shape(self) -> tuple[int, int]:
        return self.instance_map.shape

    def instance_ids(self) -> list[int]:
        return [instance_id for instance_id, _ in self.masks]


@dataclass(frozen=True, eq=False)
class _DynamicGeometry:
    bvh: Optional[Bvh]
    owner: np.ndarray
    normals: np.ndarray
    albedo: np.ndarray


def _cast(bvh: Optional[Bvh], origins: np.ndarray, directions: np.ndarray) -> BatchHits:
    n = len(origins)
    if bvh is None:
        return BatchHits(np.full(n, np.inf), np.full(n, -1, dtype=np.int64), np.zeros(n), np.zeros(n))
    return ray_cast_batch(bvh, origins, directions, np.inf)


def masks_from_instance_map(instance_map: np.ndarray):
    """Masks and tight boxes of every instance id present, in id order."""
    masks, boxes = [], []
    for instance_id in np.unique(instance_map):
        if instance_id == 0:
            continue
        mask = InstanceMask(instance_map == instance_id)
        masks.append((int(instance_id), mask))
        boxes.append((int(instance_id), bbox_from_mask(mask)))
    return tuple(boxes), tuple(masks)


def class_lookup(class_table: dict[int, int]) -> np.ndarray:
    size = max(class_table, default=0) + 1
    table = np.zeros(size, dtype=np.uint8)
    for instance_id, class_id in class_table.items():
        table[instance_id] = class_id
    return table


class SceneRenderer:
    """Renders frames of one scene; the environment BVH is built once."""

    def __init__(self, scene: Scene, camera: CameraModel, near: float = NEAR_CLIP):
        self.scene = scene
        self.camera = camera
        self.near = float(near)
        env_meshes = [m.mesh for m in scene.environment.meshes]
        self._env_mesh = TriangleMesh.concatenate(env_meshes, name=scene.environment.manifest_id)
        self._env_bvh = None if self._env_mesh.is_empty else build_bvh(self._env_mesh)
        self._env_normals = self._env_mesh.face_normals()
        per_triangle = np.repeat(np.asarray(scene.appearance.texture_ids, dtype=np.int64),
                                 [m.triangle_count for m in env_meshes])
        self._env_albedo = texture_albedo(per_triangle).reshape(-1, 3)
        self._light = np.asarray(scene.appearance.light_color) * scene.appearance.light_intensity
        self._classes = class_lookup(scene.class_table())
        self._dynamic: dict[float, _DynamicGeometry] = {}

    def check_time(self, t: float) -> None:
        if not (-TIME_TOLERANCE <= t <= self.scene.duration + TIME_TOLERANCE):
            raise OutOfRange(f"time {t!r} s is outside the experiment [0, {self.scene.duration!r}] s")

    def _dynamic_at(self, t: float) -> _DynamicGeometry:
        cached = self._dynamic.get(t)
        if cached is not None:
            return cached
        instances = self.scene.instances
        meshes = [instance_mesh_at(instance, t) for instance in instances]
        counts = [m.triangle_count for m in meshes]
        mesh = TriangleMesh.concatenate(meshes, name=f"dynamic@{t!r}")
        geometry = _DynamicGeometry(
            bvh=None if mesh.is_empty else build_bvh(mesh),
            owner=np.repeat(np.array([i.instance_id for i in instances], dtype=np.int64), counts),
            normals=mesh.face_normals(),
            albedo=texture_albedo(np.repeat(np.array([i.texture_id for i in instances], dtype=np.int64), counts)).reshape(-1, 3),
        )
        if len(self._dynamic) >= DYNAMIC_CACHE_SIZE:
            self._dynamic.clear()
        self._dynamic[t] = geometry
        return geometry

    def render_layers(self, pose: Transform, t: float, rows: Optional[np.ndarray] = None) -> RenderLayers:
        """Instance ids, depth and uint8 color for the given image rows (all rows by default)."""
        self.check_time(t)
        t = min(max(t, 0.0), self.scene.duration)
        n_rows = self.camera.height if rows is None else len(rows)
        origins, directions, forward = world_rays(self.camera, pose, rows)
        origins = origins + directions * self.near

        env = _cast(self._env_bvh, origins, directions)
        dynamic = self._dynamic_at(t)
        dyn = _cast(dynamic.bvh, origins, directions)
        # Ties go to the environment.
        use_dyn = dyn.t < env.t
        hit = env.hit | dyn.hit
        env_tri = np.maximum(env.triangle, 0)
        dyn_tri = np.maximum(dyn.triangle, 0)

        instance = np.zeros(len(origins), dtype=np.int64)
        normals = np.zeros((len(origins), 3))
        albedo = np.zeros((len(origins), 3))
        if env.hit.any():
            normals[env.hit] = self._env_normals[env_tri[env.hit]]
            albedo[env.hit] = self._env_albedo[env_tri[env.hit]]
        if use_dyn.any():
            instance[use_dyn] = dynamic.owner[dyn_tri[use_dyn]]
            normals[use_dyn] = dynamic.normals[dyn_tri[use_dyn]]
            albedo[use_dyn] = dynamic.albedo[dyn_tri[use_dyn]]

        t_hit = np.where(use_dyn, dyn.t, env.t)
        depth = np.where(hit, (t_hit + self.near) * forward, np.inf)
        shade = np.abs(np.einsum("ij,ij->i", normals, directions))
        color = np.clip(albedo * self._light * shade[:, None], 0.0, 1.0)
        rgb = np.round(color * 255.0).astype(np.uint8)
        width = self.camera.width
        return RenderLayers(instance.reshape(n_rows, width), depth.reshape(n_rows, width), rgb.reshape(n_rows, width, 3))

    def semantic_of(self, instance_map: np.ndarray) -> np.ndarray:
        return self._classes[instance_map]

    def render(self, pose: Transform, t: float, frame: int = 0) -> FrameGroundTruth:
        layers = self.render_layers(pose, t)
        boxes, masks = masks_from_instance_map(layers.instance)
        logger.debug(f"Rendered frame {frame} at t={t:.4f}s with {len(masks)} visible instances")
        return FrameGroundTruth(
            frame=int(frame),
            time=float(t),
            instance_map=layers.instance.astype(np.uint16),
            semantic_map=self.semantic_of(layers.instance),
            depth=layers.depth,
            rgb=layers.rgb,
            boxes=boxes,
            masks=masks,
        )


def render_ground_truth(scene: Scene, camera: CameraModel, pose: Transform, t: float, frame: int = 0) -> FrameGroundTruth:
    return SceneRenderer(scene, camera).render(pose, t, frame)


def validate_frame(frame: FrameGroundTruth, class_table: dict[int, int]) -> None:
    """Raise InvariantViolation unless boxes, masks and maps agree."""
    present = sorted(int(i) for i in np.unique(frame.instance_map) if i != 0)
    if [i for i, _ in frame.boxes] != present or [i for i, _ in frame.masks] != present:
        raise InvariantViolation(f"frame {frame.frame}: annotated ids do not match the instance map {present}")
    for (instance_id, box), (_, mask) in zip(frame.boxes, frame.masks):
        if not np.array_equal(mask.pixels, frame.instance_map == instance_id):
            raise InvariantViolation(f"frame {frame.frame}: mask of instance {instance_id} differs from the instance map")
        if bbox_from_mask(mask) != box:
            raise InvariantViolation(f"frame {frame.frame}: box of instance {instance_id} is not the tight mask bounds")
    expected = class_lookup(class_table)[frame.instance_map]
    if not np.array_equal(expected, frame.semantic_map):
        raise InvariantViolation(f"frame {frame.frame}: semantic map disagrees with the instance classes")
    if np.any(frame.depth[frame.instance_map != 0] <= 0):
        raise InvariantViolation(f"frame {frame.frame}: non-positive depth on an instance pixel")
