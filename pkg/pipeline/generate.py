"""``generate``: sample, explore and render every experiment of a config."""

from __future__ import annotations

import json
import logging
import shutil
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from pathlib import Path

from explore.grid import voxelize
from explore.imu import derive_imu, write_imu
from explore.planner import plan_exploration, random_free_start
from explore.trajectory import read_trajectory, write_trajectory
from gtrender.io import write_frame
from gtrender.render import SceneRenderer, validate_frame
from pipeline.config import PipelineConfig
from scenegen.animation import swept_mesh
from scenegen.assets import load_human_asset, load_object_library, procedural_human, procedural_object
from scenegen.environment import Environment, box_room, load_environment
from scenegen.scene import AssetLibrary, Scene, sample_scene, scene_digest, scene_to_json
from utils.errors import SynthError
from utils.seeding import derive_seed
from utils.telemetry import get_tracer

logger = logging.getLogger(__name__)
tracer = get_tracer(__name__)

DONE_MARKER = "done"
META_FILE = "meta.json"
SCENE_FILE = "scene.json"
TRAJECTORY_FILE = "trajectory.txt"
IMU_FILE = "imu.txt"
FRAMES_DIR = "frames"
FRAME_CHUNK = 100


def experiment_name(index: int) -> str:
    return f"exp_{index:04d}"


def experiment_seed(master: int, index: int) -> int:
    return derive_seed(master, "experiment", index)


def is_complete(directory: Path, config_hash: str) -> bool:
    marker = directory / DONE_MARKER
    return marker.is_file() and marker.read_text(encoding="utf-8").strip() == config_hash


def build_environment(config: PipelineConfig) -> Environment:
    if config.environment is not None:
        return load_environment(config.environment)
    return box_room(config.room_size)


def build_library(config: PipelineConfig) -> AssetLibrary:
    duration = config.explore.duration
    humans = tuple(load_human_asset(p, duration) for p in config.assets.humans) or (procedural_human(duration=duration),)
    objects = tuple(m for p in config.assets.flying_objects for m in load_object_library(p)) or (procedural_object(),)
    return AssetLibrary(humans, objects)


def rebuild_scene(config: PipelineConfig, index: int) -> Scene:
    """Re-sample the scene of experiment ``index``; identical on every call."""
    env = build_environment(config)
    library = build_library(config)
    return sample_scene(env, library, experiment_seed(config.seed, index), config.scene.scene_config(config.explore.duration))


def _human_obstacles(scene: Scene):
    return [swept_mesh(h.mesh, h.track).transformed(h.placement) for h in scene.humans]


def prepare_experiment(config: PipelineConfig, index: int) -> int:
    """Sample the scene, plan the trajectory and write both; returns the frame count."""
    name = experiment_name(index)
    directory = config.experiments_dir / name
    with tracer.start_as_current_span("generate.experiment") as span:
        span.set_attribute("experiment", name)
        seed = experiment_seed(config.seed, index)
        (directory / DONE_MARKER).unlink(missing_ok=True)
        shutil.rmtree(directory / FRAMES_DIR, ignore_errors=True)
        try:
            scene = rebuild_scene(config, index)
            grid = voxelize(scene.environment, config.explore.cell, config.explore.max_cells, extra_meshes=_human_obstacles(scene))
            start = random_free_start(grid, seed, config.explore.altitude_range)
            trajectory = plan_exploration(grid, start, config.explore.exploration_config())
            imu = derive_imu(trajectory)
        except SynthError as e:
            raise e.within(f"experiment {name}")

        directory.mkdir(parents=True, exist_ok=True)
        (directory / SCENE_FILE).write_text(scene_to_json(scene) + "\n", encoding="utf-8")
        write_trajectory(directory / TRAJECTORY_FILE, trajectory)
        write_imu(directory / IMU_FILE, imu)
        meta = {
            "name": name,
            "index": index,
            "seed": seed,
            "scene_digest": scene_digest(scene),
            "frames": len(trajectory),
            "has_flying_objects": scene.has_flying_objects,
            "config_hash": config.config_hash(),
        }
        (directory / META_FILE).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        logger.info(f"Experiment '{name}': planned {len(trajectory)} poses, {len(scene.humans)} humans, {len(scene.flying_objects)} flying objects")
        return len(trajectory)


def render_chunk(config: PipelineConfig, index: int, start: int, stop: int) -> int:
    """Render and write frames ``[start, stop)`` of a prepared experiment."""
    name = experiment_name(index)
    directory = config.experiments_dir / name
    with tracer.start_as_current_span("generate.render") as span:
        span.set_attribute("experiment", name)
        span.set_attribute("frames", f"{start}-{stop}")
        scene = rebuild_scene(config, index)
        trajectory = read_trajectory(directory / TRAJECTORY_FILE)
        renderer = SceneRenderer(scene, config.camera.model())
        classes = scene.class_table()
        for i in range(start, stop):
            try:
                frame = renderer.render(trajectory.pose(i), float(trajectory.timestamps[i]), i)
                validate_frame(frame, classes)
                write_frame(directory / FRAMES_DIR, frame, config.render.raster_format)
            except SynthError as e:
                raise e.within(f"experiment {name} frame {i}")
        logger.debug(f"Experiment '{name}': rendered frames {start}..{stop - 1}")
        return stop - start


def chunks(frame_count: int, size: int = FRAME_CHUNK) -> list[tuple[int, int]]:
    return [(a, min(a + size, frame_count)) for a in range(0, frame_count, size)]


def cmd_generate(config: PipelineConfig) -> dict[str, int]:
    """Generate every experiment; completed ones with a matching config hash are skipped.

    Experiments are planned in parallel, then all their frames are rendered
    in parallel chunks. Every task writes only its own files.
    """
    config_hash = config.config_hash()
    pending = [i for i in range(config.experiments) if not is_complete(config.experiments_dir / experiment_name(i), config_hash)]
    skipped = config.experiments - len(pending)
    if skipped:
        logger.info(f"{skipped} experiments already complete, skipping")

    jobs = config.resolved_jobs()
    with ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else nullcontext() as pool:
        run = pool.map if pool is not None else map
        frame_counts = list(run(prepare_experiment, [config] * len(pending), pending))
        tasks = [(i, a, b) for i, n in zip(pending, frame_counts) for a, b in chunks(n)]
        indices, starts, stops = (list(column) for column in zip(*tasks)) if tasks else ([], [], [])
        list(run(render_chunk, [config] * len(tasks), indices, starts, stops))

    for i in pending:
        (config.experiments_dir / experiment_name(i) / DONE_MARKER).write_text(config_hash + "\n", encoding="utf-8")
    logger.info(f"Generate finished: {len(pending)} generated, {skipped} skipped")
    return {"generated": len(pending), "skipped": skipped}
