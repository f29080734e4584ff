"""Rejection-sampling placement of humans and random flight paths for objects."""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from geomesh.bvh import Bvh, build_bvh
from geomesh.collide import bvh_collide
from geomesh.mesh import Transform, TriangleMesh
from scenegen.animation import AnimationTrack, swept_mesh
from scenegen.assets import AssetInstance, HumanAsset
from scenegen.environment import BadRange, Environment
from utils.errors import DataError
from utils.seeding import stream

logger = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 100


class PlacementFailed(DataError):
    code = "PLACEMENT_FAILED"

    def __init__(self, message: str, placed: int, requested: int):
        super().__init__(message, placed=placed, requested=requested)
        self.placed = placed
        self.requested = requested


def place_humans(
    env: Environment,
    assets: Sequence[HumanAsset],
    count: int,
    seed: int,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    avoid_each_other: bool = True,
    texture_count: int = 16,
    first_id: int = 1,
) -> list[AssetInstance]:
    """Place ``count`` humans upright on the floor without touching the environment.

    Each attempt draws an asset, a yaw and a floor position; it is rejected
    when the asset's swept mesh leaves the bounds, touches a non-floor
    static mesh, or (with ``avoid_each_other``) touches an earlier human.

    Raises:
        PlacementFailed: a human could not be placed in ``max_attempts`` tries.
    """
    if count < 0:
        raise BadRange(f"human count must be non-negative, got {count}")
    if count == 0:
        return []
    if not assets:
        raise BadRange("cannot place humans from an empty asset list")

    obstacles = env.obstacles()
    obstacle_bvh = None if obstacles.is_empty else build_bvh(obstacles)
    swept = [swept_mesh(asset.mesh, asset.track) for asset in assets]
    placed_bvhs: list[Bvh] = []
    instances: list[AssetInstance] = []
    lo, hi = env.bounds.min, env.bounds.max

    for k in range(count):
        rng = stream(seed, "place_humans", k)
        for attempt in range(1, max_attempts + 1):
            choice = int(rng.integers(len(assets)))
            yaw = float(rng.uniform(0.0, 2.0 * np.pi))
            x, y = rng.uniform(lo[:2], hi[:2])
            placement = Transform.from_yaw(yaw, (x, y, env.floor_height))
            world = swept[choice].transformed(placement)
            if not env.bounds.contains_box(world.bounds(), tol=1e-9):
                continue
            world_bvh = build_bvh(world)
            if obstacle_bvh is not None and bvh_collide(world_bvh, obstacle_bvh):
                continue
            if avoid_each_other and any(bvh_collide(world_bvh, other) for other in placed_bvhs):
                continue
            placed_bvhs.append(world_bvh)
            instances.append(AssetInstance(
                instance_id=first_id + k,
                semantic_class="human",
                asset_name=assets[choice].name,
                mesh=assets[choice].mesh,
                track=assets[choice].track,
                placement=placement,
                texture_id=int(rng.integers(texture_count)),
            ))
            logger.debug(f"Placed human {k + 1}/{count} ('{assets[choice].name}') after {attempt} attempt(s)")
            break
        else:
            raise PlacementFailed(
                f"could not place human {k + 1} of {count} in '{env.manifest_id}' after {max_attempts} attempts",
                placed=k,
                requested=count,
            )
    return instances


def spawn_flying_objects(
    env: Environment,
    meshes: Sequence[TriangleMesh],
    count: int,
    seed: int,
    speed_range: tuple[float, float] = (0.5, 2.0),
    duration: float = 60.0,
    scale_range: tuple[float, float] = (1.0, 1.0),
    texture_count: int = 16,
    first_id: int = 1,
) -> list[AssetInstance]:
    """Rigid objects flying through random waypoints at random constant speeds.

    Waypoints are uniform in the environment bounds; each segment has its own
    speed drawn from ``speed_range`` and lasts ``distance / speed``. No
    collision checking is done. Keyframes are added until the track reaches
    ``duration``.
    """
    if count < 0:
        raise BadRange(f"object count must be non-negative, got {count}")
    lo_speed, hi_speed = speed_range
    if not 0 < lo_speed <= hi_speed:
        raise BadRange(f"speed range [{lo_speed}, {hi_speed}] must satisfy 0 < min <= max")
    lo_scale, hi_scale = scale_range
    if not 0 < lo_scale <= hi_scale:
        raise BadRange(f"scale range [{lo_scale}, {hi_scale}] must satisfy 0 < min <= max")
    if count == 0:
        return []
    if not meshes:
        raise BadRange("cannot spawn flying objects from an empty mesh list")

    lo, hi = env.bounds.min, env.bounds.max
    instances = []
    for k in range(count):
        rng = stream(seed, "flying_objects", k)
        choice = int(rng.integers(len(meshes)))
        scale = float(rng.uniform(lo_scale, hi_scale))
        times = [0.0]
        positions = [rng.uniform(lo, hi)]
        while times[-1] < duration or len(times) < 2:
            target = rng.uniform(lo, hi)
            distance = float(np.linalg.norm(target - positions[-1]))
            if distance == 0.0:
                continue
            speed = float(rng.uniform(lo_speed, hi_speed))
            times.append(times[-1] + distance / speed)
            positions.append(target)
        rotations = Rotation.random(len(times), random_state=rng).as_quat()[:, [3, 0, 1, 2]]
        track = AnimationTrack.rigid_keyframes(times, positions, rotations)
        instances.append(AssetInstance(
            instance_id=first_id + k,
            semantic_class="flying_object",
            asset_name=meshes[choice].name,
            mesh=meshes[choice],
            track=track,
            placement=Transform(scale=scale),
            texture_id=int(rng.integers(texture_count)),
        ))
    logger.debug(f"Spawned {count} flying object(s) in '{env.manifest_id}'")
    return instances
