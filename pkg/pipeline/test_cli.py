import json

import numpy as np
import pytest

from dataset.coco import ExportSample, export_coco, parse_coco
from dataset.split import split_dataset
from gtrender.masks import InstanceMask, bbox_from_mask
from pipeline.cli import main


def _sample(frame: int, squares) -> ExportSample:
    people = []
    for instance_id, (row, col, side) in enumerate(squares, start=1):
        pixels = np.zeros((20, 24), dtype=bool)
        pixels[row:row + side, col:col + side] = True
        mask = InstanceMask(pixels)
        people.append((instance_id, mask, bbox_from_mask(mask)))
    return ExportSample("exp_0000", frame, np.zeros((20, 24, 3), dtype=np.uint8), tuple(people))


@pytest.fixture
def dataset_dir(tmp_path):
    samples = [_sample(0, ((2, 2, 10),)), _sample(1, ((0, 0, 4), (10, 12, 6))), _sample(2, ())]
    out = tmp_path / "dataset"
    export_coco(samples, split_dataset([1, 2, 3], 1.0, seed=0), out)
    return out


def _config(tmp_path, text: str = ""):
    path = tmp_path / "pipeline.yaml"
    path.write_text("schema_version: 1\nseed: 5\n" + text)
    return path


def _error_lines(capsys) -> list[str]:
    return [line for line in capsys.readouterr().err.splitlines() if line.startswith("error=")]


def test_evaluate_ground_truth_against_itself(dataset_dir, tmp_path, capsys):
    gt_path = dataset_dir / "annotations" / "instances_train.json"
    predictions = [
        {**{k: v for k, v in ann.to_dict().items() if k in ("image_id", "category_id", "bbox", "segmentation")}, "score": 0.9}
        for ann in parse_coco(gt_path).annotations
    ]
    predictions_path = tmp_path / "predictions.json"
    predictions_path.write_text(json.dumps(predictions))
    results_path = tmp_path / "results.json"

    status = main(["evaluate", "--gt", str(gt_path), "--predictions", str(predictions_path), "--out", str(results_path)])

    assert status == 0
    table = capsys.readouterr().out.splitlines()
    assert table[0].split() == ["task", "thr", "AP", "AP50"]
    assert [line.split()[0] for line in table[1:]] == ["bbox", "bbox", "mask", "mask"]
    assert all(line.split()[2:] == ["1.0000", "1.0000"] for line in table[1:])
    rows = json.loads(results_path.read_text())
    assert [row["ap"] for row in rows] == [1.0, 1.0, 1.0, 1.0]


def test_evaluate_single_task_and_thresholds(dataset_dir, tmp_path, capsys):
    gt_path = dataset_dir / "annotations" / "instances_train.json"
    predictions_path = tmp_path / "predictions.json"
    predictions_path.write_text("[]")
    assert main(["evaluate", "--gt", str(gt_path), "--predictions", str(predictions_path), "--task", "bbox", "--thresholds", "0.5"]) == 0
    (row,) = capsys.readouterr().out.splitlines()[1:]
    assert row.split() == ["bbox", "0.50", "0.0000", "0.0000"]


def test_malformed_predictions_exit_two(dataset_dir, tmp_path, capsys):
    predictions_path = tmp_path / "predictions.json"
    predictions_path.write_text('[{"image_id": 1,,}]')
    status = main(["evaluate", "--gt", str(dataset_dir / "annotations" / "instances_train.json"), "--predictions", str(predictions_path)])
    assert status == 2
    (line,) = _error_lines(capsys)
    assert line.startswith("error=PARSE_ERROR line 1 column 17")


def test_bad_thresholds_exit_one(dataset_dir, tmp_path, capsys):
    status = main(["evaluate", "--gt", str(dataset_dir / "annotations" / "instances_train.json"),
                   "--predictions", str(tmp_path / "p.json"), "--thresholds", "1.5"])
    assert status == 1
    assert _error_lines(capsys)[0].startswith("error=BAD_THRESHOLDS")


def test_missing_predictions_file_is_a_data_error(dataset_dir, tmp_path, capsys):
    status = main(["evaluate", "--gt", str(dataset_dir / "annotations" / "instances_train.json"),
                   "--predictions", str(tmp_path / "absent.json")])
    assert status == 2
    assert "absent.json" in _error_lines(capsys)[0]


def test_stats(dataset_dir, capsys):
    assert main(["stats", str(dataset_dir)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["train"]["images"] == 3
    assert report["train"]["background_images"] == 1
    assert report["train"]["annotations"] == 3
    assert report["val"]["images"] == 0
    assert report["total"]["images"] == 3


@pytest.mark.parametrize("argv", [[], ["render"], ["assemble", "--recipe", "s"], ["evaluate", "--gt", "x"]])
def test_argument_errors_exit_one(argv, capsys):
    assert main(argv) == 1
    (line,) = _error_lines(capsys)
    assert line.startswith("error=USAGE")


def test_bad_config_exits_one(tmp_path, capsys):
    path = _config(tmp_path, "unexpected: true\n")
    assert main(["generate", "--config", str(path)]) == 1
    (line,) = _error_lines(capsys)
    assert line.startswith("error=BAD_CONFIG") and "unexpected" in line


def test_zero_experiments_generate_nothing(tmp_path, capsys):
    path = _config(tmp_path, "experiments: 0\n")
    assert main(["generate", "--config", str(path), "--out", str(tmp_path / "out"), "--jobs", "1"]) == 0
    assert json.loads(capsys.readouterr().out) == {"generated": 0, "skipped": 0}


def test_unknown_recipe(tmp_path, capsys):
    path = _config(tmp_path)
    assert main(["assemble", "--config", str(path), "--recipe", "z", "--out", str(tmp_path / "out")]) == 1
    (line,) = _error_lines(capsys)
    assert line.startswith("error=UNKNOWN_RECIPE") and "a, s" in line


def test_assemble_before_generate_names_the_directory(tmp_path, capsys):
    path = _config(tmp_path, "experiments: 2\n")
    out = tmp_path / "out"
    assert main(["assemble", "--config", str(path), "--recipe", "s", "--out", str(out)]) == 2
    (line,) = _error_lines(capsys)
    assert line.startswith("error=MISSING_EXPERIMENTS")
    assert str(out / "experiments") in line
