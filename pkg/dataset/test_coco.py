from dataclasses import replace

import numpy as np
import pytest

from dataset.coco import (
    CocoDataset,
    CocoInvariantViolation,
    ExportSample,
    IoFailure,
    build_coco,
    coco_to_json,
    export_coco,
    parse_coco,
)
from dataset.split import split_dataset
from dataset.stats import BadSubsetSize, DatasetStats, dataset_stats, subset_dataset
from gtrender.masks import InstanceMask, bbox_from_mask


def person_sample(experiment: str, frame: int, squares=((2, 2, 10),), size=(20, 24)) -> ExportSample:
    people = []
    for instance_id, (row, col, side) in enumerate(squares, start=1):
        pixels = np.zeros(size, dtype=bool)
        pixels[row:row + side, col:col + side] = True
        mask = InstanceMask(pixels)
        people.append((instance_id, mask, bbox_from_mask(mask)))
    rgb = np.full(size + (3,), 40 + frame, dtype=np.uint8)
    return ExportSample(experiment, frame, rgb, tuple(people), exposure=0.02, readout=0.0137)


def test_one_person_of_one_hundred_pixels():
    dataset = build_coco([person_sample("exp0", 0)])
    (image,) = dataset.images
    (ann,) = dataset.annotations
    assert (image.width, image.height) == (24, 20)
    assert ann.area == 100
    assert list(ann.bbox) == [2, 2, 10, 10]
    assert ann.category_id == 1
    assert (ann.experiment, ann.frame) == ("exp0", 0)


def test_background_frame_keeps_its_image():
    dataset = build_coco([person_sample("exp0", 3, squares=())])
    assert len(dataset.images) == 1
    assert dataset.annotations == ()


def test_images_are_numbered_by_experiment_then_frame():
    dataset = build_coco([person_sample("b", 0), person_sample("a", 5), person_sample("a", 1)])
    assert [i.file_name for i in dataset.images] == ["a_000001.png", "a_000005.png", "b_000000.png"]
    assert [i.id for i in dataset.images] == [1, 2, 3]


def test_export_writes_rasters_and_reparses_exactly(tmp_path):
    samples = [person_sample("exp0", i, squares=((1, 1, 4 + i),) if i % 2 else ()) for i in range(5)]
    split = split_dataset([1, 2, 3, 4, 5], 0.6, seed=2)
    train, val = export_coco(samples, split, tmp_path)

    assert len(train.images) == 3 and len(val.images) == 2
    assert sorted(i.id for i in train.images + val.images) == [1, 2, 3, 4, 5]
    assert len(list((tmp_path / "images").glob("*.png"))) == 5

    train_path = tmp_path / "annotations" / "instances_train.json"
    reparsed = parse_coco(train_path)
    assert reparsed == train
    assert coco_to_json(reparsed) + "\n" == train_path.read_text()
    assert parse_coco(tmp_path / "annotations" / "instances_val.json") == val


def test_image_extras_survive_the_roundtrip(tmp_path):
    train, _ = export_coco([person_sample("exp0", 0)], split_dataset([1], 1.0, 0), tmp_path)
    image = parse_coco(tmp_path / "annotations" / "instances_train.json").images[0]
    assert image.exposure == 0.02
    assert image.readout == 0.0137


def test_validate_rejects_wrong_area():
    dataset = build_coco([person_sample("exp0", 0)])
    broken = CocoDataset(dataset.images, (replace(dataset.annotations[0], area=99),))
    with pytest.raises(CocoInvariantViolation):
        broken.validate()


def test_validate_rejects_loose_bbox():
    dataset = build_coco([person_sample("exp0", 0)])
    broken = CocoDataset(dataset.images, (replace(dataset.annotations[0], bbox=(1, 2, 11, 10)),))
    with pytest.raises(CocoInvariantViolation):
        broken.validate()


def test_validate_rejects_orphan_annotation():
    dataset = build_coco([person_sample("exp0", 0)])
    with pytest.raises(CocoInvariantViolation):
        CocoDataset((), dataset.annotations).validate()


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "taken"
    blocker.write_text("")
    with pytest.raises(IoFailure):
        export_coco([person_sample("exp0", 0)], split_dataset([1], 1.0, 0), blocker)


def test_stats_of_empty_dataset():
    assert dataset_stats(CocoDataset()) == DatasetStats()


def test_stats_count_background_images():
    dataset = build_coco([
        person_sample("e", 0),
        person_sample("e", 1, squares=((0, 0, 3), (10, 10, 3))),
        person_sample("e", 2, squares=()),
    ])
    stats = dataset_stats(dataset)
    assert stats.images == 3
    assert stats.images_with_humans == 2
    assert stats.background_images == 1
    assert stats.annotations == 3
    assert stats.histogram == {0: 1, 1: 1, 2: 1}


def test_stats_are_additive_over_the_split(tmp_path):
    samples = [person_sample("e", i, squares=((0, 0, 2),) * (i % 3)) for i in range(9)]
    split = split_dataset(list(range(1, 10)), 0.7, seed=5)
    train, val = export_coco(samples, split, tmp_path)
    assert (dataset_stats(train) + dataset_stats(val)).to_dict() == dataset_stats(build_coco(samples)).to_dict()


def test_subset_is_seeded_and_keeps_annotations():
    dataset = build_coco([person_sample("e", i) for i in range(6)])
    subset = subset_dataset(dataset, 3, seed=4)
    assert subset == subset_dataset(dataset, 3, seed=4)
    assert len(subset.images) == 3
    kept = {i.id for i in subset.images}
    assert {a.image_id for a in subset.annotations} == kept
    assert [i.id for i in subset.images] == sorted(kept)
    with pytest.raises(BadSubsetSize):
        subset_dataset(dataset, 7, seed=4)
