"""Dataset recipes: which experiments go in, which sensor model is applied, how it is split.

Two presets ship with the package:

* ``S_RECIPE``: experiments without flying objects only, fixed 0.02 s
  exposure, rolling shutter readout ~ N(0.015, 0.006) s, ideal (uncorrected)
  annotations, 16000/18000 train share.
* ``A_RECIPE``: every experiment, exposure uniform in [0, 0.1] s, the same
  shutter model, blur-corrected annotations, 80/20 split.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

from dataset.coco import CocoDataset, ExportSample, export_coco
from dataset.split import BadFraction, split_dataset
from explore.imu import ImuSeries
from explore.trajectory import Trajectory
from gtrender.camera import CameraModel
from gtrender.occlusion import DEFAULT_COVERAGE, DEFAULT_NEAR, occlusion_filter
from gtrender.render import FrameGroundTruth, SceneRenderer
from scenegen.assets import SEMANTIC_CLASS_IDS
from scenegen.scene import Scene
from sensor.blur import DEFAULT_SUBFRAMES
from sensor.exposure import ExposureModel, RollingShutterModel
from sensor.shutter import DEFAULT_SLICES
from sensor.simulate import BlurMode, SensorSettings, simulate_sensor_frame
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetRecipe:
    name: str
    include_flying_objects: bool
    exposure: ExposureModel
    shutter: RollingShutterModel = field(default_factory=RollingShutterModel)
    correct_annotations: bool = True
    train_fraction: float = 0.8
    subframes: int = DEFAULT_SUBFRAMES
    slices: int = DEFAULT_SLICES
    blur_mode: BlurMode = "render"

    def validate(self) -> None:
        if not 0.0 < self.train_fraction <= 1.0:
            raise BadFraction(f"recipe '{self.name}': train fraction must be in (0, 1], got {self.train_fraction!r}")
        self.exposure.validate()
        self.shutter.validate()

    def sensor_settings(self) -> SensorSettings:
        return SensorSettings(
            exposure=self.exposure,
            shutter=self.shutter,
            subframes=self.subframes,
            slices=self.slices,
            blur_mode=self.blur_mode,
            correct_annotations=self.correct_annotations,
        )


S_RECIPE = DatasetRecipe(
    name="s",
    include_flying_objects=False,
    exposure=ExposureModel.fixed(0.02),
    shutter=RollingShutterModel(0.015, 0.006),
    correct_annotations=False,
    train_fraction=16000 / 18000,
)

A_RECIPE = DatasetRecipe(
    name="a",
    include_flying_objects=True,
    exposure=ExposureModel.uniform(0.0, 0.1),
    shutter=RollingShutterModel(0.015, 0.006),
    correct_annotations=True,
    train_fraction=0.8,
)

PRESET_RECIPES: Mapping[str, DatasetRecipe] = {S_RECIPE.name: S_RECIPE, A_RECIPE.name: A_RECIPE}


@dataclass(frozen=True, eq=False)
class Experiment:
    """A generated experiment; frames are loaded on demand through ``load_frame``."""

    name: str
    scene: Scene
    trajectory: Trajectory
    camera: CameraModel
    load_frame: Callable[[int], FrameGroundTruth]
    imu: Optional[ImuSeries] = None

    @property
    def frame_count(self) -> int:
        return len(self.trajectory)

    @property
    def has_flying_objects(self) -> bool:
        return self.scene.has_flying_objects

    @classmethod
    def in_memory(cls, name: str, scene: Scene, trajectory: Trajectory, camera: CameraModel,
                  frames: Sequence[FrameGroundTruth], imu: Optional[ImuSeries] = None) -> "Experiment":
        return cls(name, scene, trajectory, camera, frames.__getitem__, imu)


@dataclass(frozen=True, eq=False)
class ExperimentSamples:
    experiment: str
    samples: tuple[ExportSample, ...] = ()
    discarded: int = 0
    skipped: bool = False


def recipe_accepts(recipe: DatasetRecipe, experiment: Experiment) -> bool:
    return recipe.include_flying_objects or not experiment.has_flying_objects


def process_experiment(
    experiment: Experiment,
    recipe: DatasetRecipe,
    seed: int,
    near: float = DEFAULT_NEAR,
    coverage: float = DEFAULT_COVERAGE,
) -> ExperimentSamples:
    """Occlusion-filter every frame of ``experiment`` and pass the survivors through the recipe's sensor model."""
    if not recipe_accepts(recipe, experiment):
        logger.info(f"Recipe '{recipe.name}' skips experiment '{experiment.name}' (flying objects)")
        return ExperimentSamples(experiment.name, skipped=True)

    renderer = SceneRenderer(experiment.scene, experiment.camera)
    settings = recipe.sensor_settings()
    sensor_seed = derive_seed(seed, "sensor", experiment.name)
    classes = experiment.scene.class_table()
    person = SEMANTIC_CLASS_IDS["human"]

    samples, discarded = [], 0
    for index in range(experiment.frame_count):
        frame = experiment.load_frame(index)
        if not occlusion_filter(frame, near, coverage).keep:
            discarded += 1
            continue
        noisy = simulate_sensor_frame(renderer, experiment.trajectory, frame, settings, sensor_seed, experiment.imu)
        boxes = dict(noisy.boxes)
        people = tuple(
            (instance_id, mask, boxes[instance_id])
            for instance_id, mask in noisy.masks
            if classes.get(instance_id) == person
        )
        samples.append(ExportSample(experiment.name, frame.frame, noisy.rgb, people, noisy.exposure, noisy.readout))

    logger.info(f"Experiment '{experiment.name}': {len(samples)} frames kept, {discarded} discarded by the occlusion filter")
    return ExperimentSamples(experiment.name, tuple(samples), discarded)


def finalize_recipe(
    results: Iterable[ExperimentSamples],
    recipe: DatasetRecipe,
    seed: int,
    output_dir: str | Path,
) -> tuple[CocoDataset, CocoDataset]:
    """Merge per-experiment samples, split them and write the COCO export."""
    samples = sorted((s for r in results for s in r.samples), key=lambda s: s.key)
    image_ids = list(range(1, len(samples) + 1))
    split = split_dataset(image_ids, recipe.train_fraction, seed)
    return export_coco(samples, split, output_dir)


def assemble_recipe(
    experiments: Sequence[Experiment],
    recipe: DatasetRecipe,
    seed: int,
    output_dir: str | Path,
    near: float = DEFAULT_NEAR,
    coverage: float = DEFAULT_COVERAGE,
) -> tuple[CocoDataset, CocoDataset]:
    recipe.validate()
    results = [process_experiment(e, recipe, seed, near, coverage) for e in experiments]
    train, val = finalize_recipe(results, recipe, seed, output_dir)
    logger.info(f"Recipe '{recipe.name}': {len(train.images)} train, {len(val.images)} val images")
    return train, val
