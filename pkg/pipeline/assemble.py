"""``assemble``: turn generated experiments into a recipe's COCO dataset."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

from dataset.coco import IoFailure
from dataset.recipe import Experiment, ExperimentSamples, finalize_recipe, process_experiment
from dataset.stats import dataset_stats
from explore.imu import read_imu
from explore.trajectory import read_trajectory
from gtrender.io import read_frame, write_noisy_rgb
from pipeline.config import PipelineConfig
from pipeline.generate import FRAMES_DIR, IMU_FILE, META_FILE, TRAJECTORY_FILE, experiment_name, is_complete, rebuild_scene
from scenegen.scene import scene_digest
from utils.errors import DataError, SynthError, UsageError
from utils.telemetry import get_tracer

logger = logging.getLogger(__name__)
tracer = get_tracer(__name__)

STATS_FILE = "stats.json"


class UnknownRecipe(UsageError):
    code = "UNKNOWN_RECIPE"


class MissingExperiments(DataError):
    code = "MISSING_EXPERIMENTS"


class SceneDigestMismatch(DataError):
    code = "SCENE_DIGEST_MISMATCH"


def load_experiment(config: PipelineConfig, index: int) -> Experiment:
    """Rebuild an experiment from its seed and check it against what generate wrote."""
    name = experiment_name(index)
    directory = config.experiments_dir / name
    try:
        meta = json.loads((directory / META_FILE).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise MissingExperiments(f"cannot read {directory / META_FILE}: {e}") from e
    scene = rebuild_scene(config, index)
    if scene_digest(scene) != meta["scene_digest"]:
        raise SceneDigestMismatch(f"experiment {name}: re-sampled scene differs from the generated one")
    trajectory = read_trajectory(directory / TRAJECTORY_FILE)
    imu = read_imu(directory / IMU_FILE)
    return Experiment(name, scene, trajectory, config.camera.model(), partial(read_frame, directory / FRAMES_DIR), imu)


def assemble_experiment(config: PipelineConfig, recipe_name: str, index: int) -> ExperimentSamples:
    recipe = config.recipe(recipe_name)
    with tracer.start_as_current_span("assemble.experiment") as span:
        span.set_attribute("experiment", experiment_name(index))
        span.set_attribute("recipe", recipe_name)
        try:
            experiment = load_experiment(config, index)
            result = process_experiment(experiment, recipe, config.seed, config.filter.near, config.filter.coverage)
            frames_dir = config.experiments_dir / experiment_name(index) / FRAMES_DIR
            for sample in result.samples:
                write_noisy_rgb(frames_dir, sample.frame, sample.rgb, recipe_name)
            return result
        except SynthError as e:
            raise e.within(f"experiment {experiment_name(index)}")


def _check_experiments(config: PipelineConfig) -> None:
    root = config.experiments_dir
    if not root.is_dir():
        raise MissingExperiments(f"experiments directory {root} does not exist; run generate first")
    config_hash = config.config_hash()
    missing = [experiment_name(i) for i in range(config.experiments) if not is_complete(root / experiment_name(i), config_hash)]
    if missing:
        shown = ", ".join(missing[:5]) + (" ..." if len(missing) > 5 else "")
        raise MissingExperiments(f"{len(missing)} experiments under {root} are missing or stale: {shown}")


def cmd_assemble(config: PipelineConfig, recipe_name: str) -> Path:
    """Write ``<output_root>/datasets/<recipe>/`` and return its path."""
    recipe = config.recipe(recipe_name)
    if recipe is None:
        raise UnknownRecipe(f"unknown recipe '{recipe_name}'; configured: {', '.join(sorted(config.recipes)) or 'none'}")
    _check_experiments(config)
    output_dir = config.datasets_dir / recipe_name

    with tracer.start_as_current_span("assemble.recipe") as span:
        span.set_attribute("recipe", recipe_name)
        indices = list(range(config.experiments))
        jobs = min(config.resolved_jobs(), max(1, len(indices)))
        if jobs == 1:
            results = [assemble_experiment(config, recipe_name, i) for i in indices]
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(assemble_experiment, [config] * len(indices), [recipe_name] * len(indices), indices))
        train, val = finalize_recipe(results, recipe, config.seed, output_dir)

    stats = {
        "recipe": recipe_name,
        "discarded_by_occlusion": sum(r.discarded for r in results),
        "skipped_experiments": [r.experiment for r in results if r.skipped],
        "train": dataset_stats(train).to_dict(),
        "val": dataset_stats(val).to_dict(),
        "total": (dataset_stats(train) + dataset_stats(val)).to_dict(),
    }
    try:
        (output_dir / STATS_FILE).write_text(json.dumps(stats, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot write {output_dir / STATS_FILE}: {e}") from e
    logger.info(f"Recipe '{recipe_name}': {len(train.images)} train / {len(val.images)} val images in {output_dir}")
    return output_dir
