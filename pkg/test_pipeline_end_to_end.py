"""Whole pipeline on a tiny room: generate, assemble both recipes, stats.

The same config is run with one and with eight worker processes; every
written byte must agree.
"""

import json
from pathlib import Path

import pytest

from dataset.coco import parse_coco
from pipeline.cli import main

CONFIG = """\
schema_version: 1
seed: 2024
experiments: 4
room_size: [5.0, 4.0, 2.5]
scene:
  human_count: [1, 2]
  object_count: [0, 1]
explore:
  duration: 0.5
  fps: 30
camera:
  width: 40
  height: 30
filter:
  near: 0.2
sensor:
  subframes: 3
  slices: 4
"""


def _run(config: Path, out: Path, jobs: int) -> None:
    common = ["--config", str(config), "--out", str(out), "--jobs", str(jobs)]
    assert main(["generate", *common]) == 0
    for recipe in ("s", "a"):
        assert main(["assemble", *common, "--recipe", recipe]) in (0, 2)


def _tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("e2e")
    config = root / "pipeline.yaml"
    config.write_text(CONFIG)
    _run(config, root / "serial", jobs=1)
    _run(config, root / "parallel", jobs=8)
    return config, root / "serial", root / "parallel"


def _metas(out: Path) -> list[dict]:
    return [json.loads(p.read_text()) for p in sorted((out / "experiments").glob("exp_*/meta.json"))]


def test_every_experiment_has_thirty_fps_frames(runs):
    _, serial, _ = runs
    metas = _metas(serial)
    assert [m["name"] for m in metas] == ["exp_0000", "exp_0001", "exp_0002", "exp_0003"]
    for meta in metas:
        directory = serial / "experiments" / meta["name"]
        assert meta["frames"] == 15
        records = [line for line in (directory / "trajectory.txt").read_text().splitlines() if not line.startswith("#")]
        assert len(records) == 15
        assert (directory / "done").is_file()


def test_outputs_do_not_depend_on_worker_count(runs):
    _, serial, parallel = runs
    serial_tree, parallel_tree = _tree(serial), _tree(parallel)
    assert serial_tree.keys() == parallel_tree.keys()
    different = [name for name in serial_tree if serial_tree[name] != parallel_tree[name]]
    assert different == []


def test_recipe_a_uses_every_experiment(runs):
    _, serial, _ = runs
    stats = json.loads((serial / "datasets" / "a" / "stats.json").read_text())
    assert stats["skipped_experiments"] == []
    train = parse_coco(serial / "datasets" / "a" / "annotations" / "instances_train.json")
    val = parse_coco(serial / "datasets" / "a" / "annotations" / "instances_val.json")
    total = len(train.images) + len(val.images)
    assert total + stats["discarded_by_occlusion"] == 4 * 15
    assert len(train.images) == int(0.8 * total + 1e-9)
    for dataset in (train, val):
        dataset.validate()
        assert all(image.exposure is not None and 0.0 <= image.exposure <= 0.1 for image in dataset.images)
        for image in dataset.images:
            assert (serial / "datasets" / "a" / "images" / image.file_name).is_file()
            experiment, frame = image.file_name.removesuffix(".png").rsplit("_", 1)
            assert (serial / "experiments" / experiment / "frames" / f"{frame}_rgb_a_noisy.png").is_file()


def test_recipe_s_keeps_only_experiments_without_flying_objects(runs):
    _, serial, _ = runs
    clean = {m["name"] for m in _metas(serial) if not m["has_flying_objects"]}
    if not clean:
        pytest.skip("every sampled experiment contains flying objects")
    stats = json.loads((serial / "datasets" / "s" / "stats.json").read_text())
    assert set(stats["skipped_experiments"]) == {m["name"] for m in _metas(serial)} - clean
    for split in ("train", "val"):
        dataset = parse_coco(serial / "datasets" / "s" / "annotations" / f"instances_{split}.json")
        assert all(image.exposure == 0.02 for image in dataset.images)
        assert {ann.experiment for ann in dataset.annotations} <= clean


def test_rerun_skips_completed_experiments(runs, capsys):
    config, serial, _ = runs
    capsys.readouterr()
    assert main(["generate", "--config", str(config), "--out", str(serial), "--jobs", "1"]) == 0
    assert json.loads(capsys.readouterr().out) == {"generated": 0, "skipped": 4}


def test_stats_command_matches_assemble(runs, capsys):
    _, serial, _ = runs
    capsys.readouterr()
    assert main(["stats", str(serial / "datasets" / "a")]) == 0
    report = json.loads(capsys.readouterr().out)
    written = json.loads((serial / "datasets" / "a" / "stats.json").read_text())
    assert report["total"] == written["total"]
