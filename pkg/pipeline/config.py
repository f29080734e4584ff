"""Pipeline configuration file (YAML, ``schema_version: 1``)."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from dataset.recipe import A_RECIPE, S_RECIPE, DatasetRecipe
from explore.grid import DEFAULT_MAX_CELLS
from explore.planner import ExplorationConfig
from gtrender.camera import CameraModel
from gtrender.occlusion import DEFAULT_COVERAGE, DEFAULT_NEAR
from scenegen.environment import AppearanceRanges
from scenegen.scene import SceneConfig
from sensor.exposure import MAX_EXPOSURE, ExposureModel, RollingShutterModel
from utils.errors import UsageError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
# keys that never change what gets generated
OPERATIONAL_KEYS = {"jobs", "output_root"}


class ConfigError(UsageError):
    code = "BAD_CONFIG"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class AssetPaths(_Section):
    """Empty lists select the built-in procedural assets."""

    humans: list[Path] = Field(default_factory=list)
    flying_objects: list[Path] = Field(default_factory=list)

    @field_validator("humans", "flying_objects")
    @classmethod
    def _paths_exist(cls, paths: list[Path]) -> list[Path]:
        for path in paths:
            if not path.is_dir():
                raise ValueError(f"asset directory {path} does not exist")
        return paths


class SceneSection(_Section):
    human_count: tuple[int, int] = (0, 3)
    object_count: tuple[int, int] = (0, 3)
    max_attempts: int = Field(default=100, ge=1)
    avoid_human_collisions: bool = True
    object_speed: tuple[float, float] = (0.5, 2.0)
    object_scale: tuple[float, float] = (0.8, 1.2)
    texture_count: int = Field(default=16, ge=1)
    light_color_min: tuple[float, float, float] = (0.6, 0.6, 0.6)
    light_color_max: tuple[float, float, float] = (1.0, 1.0, 1.0)
    intensity: tuple[float, float] = (0.5, 1.5)

    def scene_config(self, duration: float) -> SceneConfig:
        appearance = AppearanceRanges(
            texture_count=self.texture_count,
            light_color_min=self.light_color_min,
            light_color_max=self.light_color_max,
            intensity_min=self.intensity[0],
            intensity_max=self.intensity[1],
        )
        return SceneConfig(
            human_count=self.human_count,
            object_count=self.object_count,
            appearance=appearance,
            max_attempts=self.max_attempts,
            avoid_human_collisions=self.avoid_human_collisions,
            object_speed=self.object_speed,
            object_scale=self.object_scale,
            duration=duration,
        )


class ExploreSection(_Section):
    duration: float = Field(default=60.0, gt=0)
    fps: float = Field(default=30.0, gt=0)
    v_max: float = Field(default=1.0, ge=0)
    sensor_range: float = Field(default=5.0, gt=0)
    cell: float = Field(default=0.25, gt=0)
    max_cells: int = Field(default=DEFAULT_MAX_CELLS, ge=1)
    pitch_deg: float = 0.0
    max_yaw_rate_deg: float = Field(default=90.0, gt=0)
    altitude_range: Optional[tuple[float, float]] = None

    @model_validator(mode="after")
    def _integer_frame_count(self) -> "ExploreSection":
        frames = self.duration * self.fps
        if abs(frames - round(frames)) > 1e-9:
            raise ValueError(f"duration {self.duration} s at {self.fps} fps is not a whole number of frames")
        return self

    @property
    def frame_count(self) -> int:
        return int(round(self.duration * self.fps))

    def exploration_config(self) -> ExplorationConfig:
        return ExplorationConfig(
            fps=self.fps,
            duration=self.duration,
            v_max=self.v_max,
            sensor_range=self.sensor_range,
            pitch=math.radians(self.pitch_deg),
            max_yaw_rate=math.radians(self.max_yaw_rate_deg),
            altitude_range=self.altitude_range,
        )


class CameraSection(_Section):
    width: int = Field(default=160, ge=1)
    height: int = Field(default=120, ge=1)
    hfov_deg: float = Field(default=90.0, gt=0, lt=180)
    fx: Optional[float] = Field(default=None, gt=0)
    fy: Optional[float] = Field(default=None, gt=0)

    def model(self) -> CameraModel:
        if self.fx is not None:
            return CameraModel(self.width, self.height, self.fx, self.fy or self.fx)
        return CameraModel.from_fov(self.width, self.height, math.radians(self.hfov_deg))


class RenderSection(_Section):
    raster_format: Literal["png", "pgm"] = "png"


class FilterSection(_Section):
    near: float = Field(default=DEFAULT_NEAR, gt=0)
    coverage: float = Field(default=DEFAULT_COVERAGE, ge=0, le=1)


class SensorSection(_Section):
    subframes: int = Field(default=9, ge=1)
    slices: int = Field(default=16, ge=1)
    blur_mode: Literal["render", "kernel"] = "render"

    @field_validator("subframes")
    @classmethod
    def _odd(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("subframes must be odd")
        return value


class ExposureSection(_Section):
    mode: Literal["fixed", "uniform"] = "fixed"
    value: float = Field(default=0.02, ge=0, le=MAX_EXPOSURE)
    range: tuple[float, float] = (0.0, MAX_EXPOSURE)


class ShutterSection(_Section):
    mu: float = Field(default=0.015, ge=0)
    sigma: float = Field(default=0.006, ge=0)


class RecipeSection(_Section):
    include_flying_objects: bool
    exposure: ExposureSection
    shutter: ShutterSection = Field(default_factory=ShutterSection)
    correct_annotations: bool = True
    train_fraction: float = Field(default=0.8, gt=0, le=1)

    @staticmethod
    def of(recipe: DatasetRecipe) -> "RecipeSection":
        return RecipeSection(
            include_flying_objects=recipe.include_flying_objects,
            exposure=ExposureSection(mode=recipe.exposure.mode, value=recipe.exposure.value, range=recipe.exposure.range),
            shutter=ShutterSection(mu=recipe.shutter.mu, sigma=recipe.shutter.sigma),
            correct_annotations=recipe.correct_annotations,
            train_fraction=recipe.train_fraction,
        )

    def recipe(self, name: str, sensor: SensorSection) -> DatasetRecipe:
        recipe = DatasetRecipe(
            name=name,
            include_flying_objects=self.include_flying_objects,
            exposure=ExposureModel(self.exposure.mode, value=self.exposure.value, range=self.exposure.range),
            shutter=RollingShutterModel(self.shutter.mu, self.shutter.sigma),
            correct_annotations=self.correct_annotations,
            train_fraction=self.train_fraction,
            subframes=sensor.subframes,
            slices=sensor.slices,
            blur_mode=sensor.blur_mode,
        )
        recipe.validate()
        return recipe


def _default_recipes() -> dict[str, RecipeSection]:
    return {S_RECIPE.name: RecipeSection.of(S_RECIPE), A_RECIPE.name: RecipeSection.of(A_RECIPE)}


class PipelineConfig(_Section):
    schema_version: Literal[1] = SCHEMA_VERSION
    seed: int
    experiments: int = Field(default=1, ge=0)
    output_root: Path = Path("out")
    jobs: Optional[int] = Field(default=None, ge=1)
    environment: Optional[Path] = None
    room_size: tuple[float, float, float] = (10.0, 10.0, 3.0)
    assets: AssetPaths = Field(default_factory=AssetPaths)
    scene: SceneSection = Field(default_factory=SceneSection)
    explore: ExploreSection = Field(default_factory=ExploreSection)
    camera: CameraSection = Field(default_factory=CameraSection)
    render: RenderSection = Field(default_factory=RenderSection)
    filter: FilterSection = Field(default_factory=FilterSection)
    sensor: SensorSection = Field(default_factory=SensorSection)
    recipes: dict[str, RecipeSection] = Field(default_factory=_default_recipes)

    @field_validator("environment")
    @classmethod
    def _manifest_exists(cls, path: Optional[Path]) -> Optional[Path]:
        if path is not None and not path.is_file():
            raise ValueError(f"environment manifest {path} does not exist")
        return path

    def config_hash(self) -> str:
        payload = self.model_dump(mode="json", exclude=OPERATIONAL_KEYS)
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def resolved_jobs(self) -> int:
        if self.jobs is not None:
            return self.jobs
        env_jobs = os.getenv("ROOMSYNTH_JOBS")
        if env_jobs:
            try:
                return max(1, int(env_jobs))
            except ValueError:
                raise ConfigError(f"ROOMSYNTH_JOBS must be an integer, got '{env_jobs}'") from None
        return os.cpu_count() or 1

    def recipe(self, name: str) -> Optional[DatasetRecipe]:
        section = self.recipes.get(name)
        return None if section is None else section.recipe(name, self.sensor)

    @property
    def experiments_dir(self) -> Path:
        return self.output_root / "experiments"

    @property
    def datasets_dir(self) -> Path:
        return self.output_root / "datasets"


def _describe(error: ValidationError) -> str:
    first = error.errors()[0]
    where = ".".join(str(part) for part in first["loc"]) or "<root>"
    more = f" (+{error.error_count() - 1} more)" if error.error_count() > 1 else ""
    return f"{where}: {first['msg']}{more}"


def build_config(data: dict[str, Any], overrides: Optional[dict[str, Any]] = None) -> PipelineConfig:
    merged = dict(data)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return PipelineConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {_describe(e)}") from e


def load_config(path: str | Path, overrides: Optional[dict[str, Any]] = None) -> PipelineConfig:
    """Read, validate and apply command-line ``overrides`` (``None`` values are ignored)."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"config {path} must declare schema_version: {SCHEMA_VERSION}")
    config = build_config(data, overrides)
    logger.debug(f"Loaded config {path} (hash {config.config_hash()[:12]})")
    return config
