from pathlib import Path

import pytest

from dataset.recipe import A_RECIPE, S_RECIPE
from pipeline.config import ConfigError, PipelineConfig, build_config, load_config


def test_defaults_give_eighteen_hundred_frames():
    config = PipelineConfig(seed=1)
    assert config.explore.frame_count == 1800
    assert config.explore.exploration_config().frame_count == 1800


def test_default_recipes_match_presets():
    config = PipelineConfig(seed=1)
    assert config.recipe("s") == S_RECIPE
    assert config.recipe("a") == A_RECIPE
    assert config.recipe("nope") is None


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError) as info:
        build_config({"schema_version": 1, "seed": 1, "colour": "red"})
    assert "colour" in info.value.message


def test_seed_is_required():
    with pytest.raises(ConfigError):
        build_config({"schema_version": 1})


def test_fractional_frame_count():
    with pytest.raises(ConfigError):
        build_config({"schema_version": 1, "seed": 1, "explore": {"duration": 1.05, "fps": 10}})


def test_missing_environment_manifest(tmp_path):
    with pytest.raises(ConfigError):
        build_config({"schema_version": 1, "seed": 1, "environment": str(tmp_path / "nowhere.yaml")})


def test_even_subframes_rejected():
    with pytest.raises(ConfigError):
        build_config({"schema_version": 1, "seed": 1, "sensor": {"subframes": 4}})


def test_hash_ignores_operational_keys():
    base = build_config({"schema_version": 1, "seed": 1})
    assert base.config_hash() == build_config({"schema_version": 1, "seed": 1}, {"jobs": 8, "output_root": "elsewhere"}).config_hash()
    assert base.config_hash() != build_config({"schema_version": 1, "seed": 2}).config_hash()


def test_load_with_overrides(tmp_path):
    path = tmp_path / "pipeline.yaml"
    path.write_text("schema_version: 1\nseed: 3\nexperiments: 4\ncamera:\n  width: 64\n  height: 48\n")
    config = load_config(path, {"seed": 9, "experiments": None, "jobs": 2})
    assert (config.seed, config.experiments, config.jobs) == (9, 4, 2)
    assert config.camera.model().shape == (48, 64)


def test_schema_version_is_required(tmp_path):
    path = tmp_path / "pipeline.yaml"
    path.write_text("seed: 3\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_jobs_from_environment(monkeypatch):
    monkeypatch.setenv("ROOMSYNTH_JOBS", "3")
    assert PipelineConfig(seed=1).resolved_jobs() == 3
    assert PipelineConfig(seed=1, jobs=5).resolved_jobs() == 5
    monkeypatch.setenv("ROOMSYNTH_JOBS", "many")
    with pytest.raises(ConfigError):
        PipelineConfig(seed=1).resolved_jobs()


def test_example_config_loads(monkeypatch):
    root = Path(__file__).resolve().parent.parent
    monkeypatch.chdir(root)
    config = load_config("configs/example.yaml")
    assert config.recipe("s") == S_RECIPE
    assert config.recipe("a") == A_RECIPE
    assert config.explore.frame_count == 1800
