"""Complete randomized scenes and their canonical serialization."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

from geomesh.mesh import TriangleMesh
from scenegen.assets import SEMANTIC_CLASS_IDS, AssetInstance, HumanAsset
from scenegen.environment import AppearanceRandomization, AppearanceRanges, BadRange, Environment, randomize_environment
from scenegen.placement import DEFAULT_MAX_ATTEMPTS, place_humans, spawn_flying_objects
from utils.seeding import stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SceneConfig:
    human_count: tuple[int, int] = (0, 3)
    object_count: tuple[int, int] = (0, 3)
    appearance: AppearanceRanges = field(default_factory=AppearanceRanges)
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    avoid_human_collisions: bool = True
    object_speed: tuple[float, float] = (0.5, 2.0)
    object_scale: tuple[float, float] = (0.8, 1.2)
    duration: float = 60.0


@dataclass(frozen=True, eq=False)
class AssetLibrary:
    humans: tuple[HumanAsset, ...]
    flying_objects: tuple[TriangleMesh, ...]


@dataclass(frozen=True, eq=False)
class Scene:
    environment: Environment
    appearance: AppearanceRandomization
    instances: tuple[AssetInstance, ...]
    seed: int
    duration: float

    @property
    def humans(self) -> list[AssetInstance]:
        return [i for i in self.instances if i.semantic_class == "human"]

    @property
    def flying_objects(self) -> list[AssetInstance]:
        return [i for i in self.instances if i.semantic_class == "flying_object"]

    @property
    def has_flying_objects(self) -> bool:
        return any(i.semantic_class == "flying_object" for i in self.instances)

    def class_table(self) -> dict[int, int]:
        """Instance id to semantic class id."""
        return {i.instance_id: i.class_id for i in self.instances}


def _draw_count(rng, bounds: tuple[int, int], what: str) -> int:
    lo, hi = bounds
    if not 0 <= lo <= hi:
        raise BadRange(f"{what} count range [{lo}, {hi}] must satisfy 0 <= min <= max")
    return int(rng.integers(lo, hi + 1))


def sample_scene(env: Environment, library: AssetLibrary, seed: int, config: SceneConfig) -> Scene:
    counts = stream(seed, "counts")
    n_humans = _draw_count(counts, config.human_count, "human")
    n_objects = _draw_count(counts, config.object_count, "object")
    appearance = randomize_environment(env, seed, config.appearance)
    humans = place_humans(
        env, library.humans, n_humans, seed,
        max_attempts=config.max_attempts,
        avoid_each_other=config.avoid_human_collisions,
        texture_count=config.appearance.texture_count,
        first_id=1,
    )
    objects = spawn_flying_objects(
        env, library.flying_objects, n_objects, seed,
        speed_range=config.object_speed,
        duration=config.duration,
        scale_range=config.object_scale,
        texture_count=config.appearance.texture_count,
        first_id=len(humans) + 1,
    )
    logger.info(f"Sampled scene seed={seed} in '{env.manifest_id}': {n_humans} humans, {n_objects} flying objects")
    return Scene(env, appearance, tuple(humans + objects), int(seed), float(config.duration))


def scene_to_dict(scene: Scene) -> dict:
    return {
        "seed": scene.seed,
        "environment": scene.environment.manifest_id,
        "duration": scene.duration,
        "appearance": scene.appearance.to_dict(),
        "counts": {
            "human": len(scene.humans),
            "flying_object": len(scene.flying_objects),
        },
        "classes": {name: class_id for name, class_id in SEMANTIC_CLASS_IDS.items()},
        "instances": [instance.to_dict() for instance in scene.instances],
    }


def scene_to_json(scene: Scene) -> str:
    """Canonical serialization: sorted keys, no whitespace, shortest float repr."""
    return json.dumps(scene_to_dict(scene), sort_keys=True, separators=(",", ":"))


def scene_digest(scene: Scene) -> str:
    return hashlib.sha256(scene_to_json(scene).encode("utf-8")).hexdigest()
