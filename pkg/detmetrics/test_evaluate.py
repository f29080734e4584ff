import logging
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dataset.coco import CocoAnnotation, CocoDataset, CocoImage
from dataset.rle import encode_rle
from detmetrics.evaluate import (
    BadCategory,
    BadEvalConfig,
    Detection,
    EvalConfig,
    UnknownImage,
    evaluate,
    report_configs,
    threshold_report,
)
from gtrender.masks import InstanceMask

SIZE = (64, 64)


def rect_pixels(box, size=SIZE):
    x, y, w, h = box
    pixels = np.zeros(size, dtype=bool)
    pixels[y:y + h, x:x + w] = True
    return pixels


def ground_truth(boxes_by_image: dict[int, list]) -> CocoDataset:
    images, anns = [], []
    for image_id, boxes in boxes_by_image.items():
        images.append(CocoImage(image_id, f"{image_id}.png", SIZE[1], SIZE[0]))
        for box in boxes:
            pixels = rect_pixels(box)
            anns.append(CocoAnnotation(len(anns) + 1, image_id, 1, tuple(box), tuple(encode_rle(pixels)), SIZE, int(pixels.sum())))
    return CocoDataset(tuple(images), tuple(anns))


def det(image_id, score, box, with_mask=True):
    mask = InstanceMask(rect_pixels(box)) if with_mask else None
    return Detection(image_id, 1, score, tuple(float(v) for v in box), mask)


GT_ONE = {1: [[10, 10, 20, 20]]}


def test_perfect_detector():
    gt = ground_truth({1: [[0, 0, 10, 10], [30, 30, 5, 8]], 2: [[5, 5, 20, 20]]})
    dets = [det(a.image_id, 1.0, a.bbox) for a in gt.annotations]
    for iou_type in ("bbox", "mask"):
        result = evaluate(gt, dets, EvalConfig(iou_type=iou_type))
        assert result.ap == 1.0 and result.ap50 == 1.0


def test_no_detections():
    result = evaluate(ground_truth(GT_ONE), [])
    assert result.ap == 0.0 and result.ap50 == 0.0


def test_true_positive_ranked_first():
    dets = [det(1, 0.9, [10, 10, 20, 20]), det(1, 0.8, [50, 50, 5, 5])]
    assert evaluate(ground_truth(GT_ONE), dets).ap50 == 1.0


def test_false_positive_ranked_first():
    dets = [det(1, 0.9, [50, 50, 5, 5]), det(1, 0.8, [10, 10, 20, 20])]
    assert evaluate(ground_truth(GT_ONE), dets).ap50 == pytest.approx(0.5, abs=1e-12)


def test_threshold_above_every_score():
    dets = [det(1, 0.9, [10, 10, 20, 20])]
    assert evaluate(ground_truth(GT_ONE), dets, EvalConfig(score_threshold=1.0)).ap == 0.0


def test_threshold_zero_is_no_filter():
    gt = ground_truth({1: [[0, 0, 10, 10]], 2: [[5, 5, 12, 9]]})
    dets = [det(1, 0.3, [1, 0, 10, 10]), det(2, 0.0, [5, 6, 12, 9]), det(2, 0.6, [40, 40, 4, 4])]
    assert evaluate(gt, dets, EvalConfig(score_threshold=0.0)).ap == evaluate(gt, dets).ap


def test_ap_is_mean_of_per_threshold_values():
    gt = ground_truth({1: [[0, 0, 10, 10], [20, 20, 10, 10]]})
    dets = [det(1, 0.9, [1, 1, 10, 10]), det(1, 0.7, [22, 21, 10, 10]), det(1, 0.5, [0, 0, 9, 10])]
    result = evaluate(gt, dets)
    assert len(result.per_threshold_ap) == 10
    assert abs(result.ap - sum(result.per_threshold_ap) / 10) <= 1e-12
    assert 0.0 <= result.ap <= 1.0 and 0.0 <= result.ap50 <= 1.0


def test_duplicate_never_helps():
    gt = ground_truth({1: [[0, 0, 10, 10], [20, 20, 10, 10]]})
    dets = [det(1, 0.9, [0, 0, 10, 10]), det(1, 0.6, [21, 20, 10, 10])]
    duplicated = dets + [det(1, 0.8, [0, 0, 10, 10])]
    assert evaluate(gt, duplicated).ap <= evaluate(gt, dets).ap


def test_zero_ground_truth_warns(caplog):
    with caplog.at_level(logging.WARNING):
        result = evaluate(ground_truth({1: []}), [det(1, 0.5, [0, 0, 3, 3])])
    assert result.ap == 0.0 and result.ap50 == 0.0
    assert "no person annotations" in caplog.text


def test_unknown_image():
    with pytest.raises(UnknownImage):
        evaluate(ground_truth(GT_ONE), [det(7, 0.5, [0, 0, 3, 3])])


def test_bad_category():
    with pytest.raises(BadCategory):
        evaluate(ground_truth(GT_ONE), [Detection(1, 2, 0.5, (0.0, 0.0, 3.0, 3.0))])


@pytest.mark.parametrize("cfg", [
    EvalConfig(iou_thresholds=(0.6, 0.5)),
    EvalConfig(iou_thresholds=()),
    EvalConfig(recall_points=1),
    EvalConfig(score_threshold=1.5),
])
def test_bad_config(cfg):
    with pytest.raises(BadEvalConfig):
        evaluate(ground_truth(GT_ONE), [], cfg)


def test_threshold_report_rows():
    gt = ground_truth(GT_ONE)
    dets = [det(1, 0.9, [10, 10, 20, 20]), det(1, 0.3, [11, 10, 20, 20])]
    rows = threshold_report(gt, dets, report_configs([0.7, 0.05]))
    assert [(r.task, r.score_threshold) for r in rows] == [("bbox", 0.7), ("bbox", 0.05), ("mask", 0.7), ("mask", 0.05)]
    assert all(r.ap50 == 1.0 for r in rows)


# Independent evaluator: explicit precision/recall enumeration in plain Python.

def plain_iou(a, b):
    ix = max(0.0, min(a[0] + a[2], b[0] + b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = a[2] * a[3] + b[2] * b[3] - inter
    return inter / union if union > 0 else 0.0


def brute_force_ap(gt_boxes, dets, iou_threshold, score_threshold=0.0, max_dets=100):
    npos = sum(len(boxes) for boxes in gt_boxes.values())
    outcomes = []
    for image_id, boxes in gt_boxes.items():
        mine = [(i, d) for i, d in enumerate(dets) if d.image_id == image_id and d.score >= score_threshold]
        mine.sort(key=lambda p: (-p[1].score, p[0]))
        used = set()
        for i, d in mine[:max_dets]:
            best, best_iou = None, -1.0
            for g, box in enumerate(boxes):
                if g in used:
                    continue
                iou = plain_iou(d.bbox, box)
                if iou >= iou_threshold and iou > best_iou:
                    best, best_iou = g, iou
            if best is not None:
                used.add(best)
            outcomes.append((-d.score, i, best is not None))
    if npos == 0:
        return 0.0
    outcomes.sort()
    points, tp, fp = [], 0, 0
    for _, _, hit in outcomes:
        tp += hit
        fp += not hit
        points.append((tp / npos, tp / (tp + fp)))
    total = 0.0
    for r in np.linspace(0.0, 1.0, 101):
        total += max((p for rc, p in points if rc >= r), default=0.0)
    return total / 101


def random_instance(seed):
    rng = random.Random(seed)
    gt_boxes = {}
    for image_id in range(1, rng.randint(1, 10) + 1):
        gt_boxes[image_id] = [
            [rng.randint(0, 40), rng.randint(0, 40), rng.randint(2, 20), rng.randint(2, 20)]
            for _ in range(rng.randint(0, 5))
        ]
    dets = []
    for image_id, boxes in gt_boxes.items():
        for box in boxes:
            if rng.random() < 0.8:
                jitter = [box[0] + rng.randint(-3, 3), box[1] + rng.randint(-3, 3), max(1, box[2] + rng.randint(-3, 3)), box[3]]
                dets.append(Detection(image_id, 1, rng.random(), tuple(float(v) for v in jitter)))
        for _ in range(rng.randint(0, 5 - len(boxes))):
            box = (rng.randint(0, 50), rng.randint(0, 50), rng.randint(1, 15), rng.randint(1, 15))
            dets.append(Detection(image_id, 1, rng.random(), tuple(float(v) for v in box)))
    rng.shuffle(dets)
    return gt_boxes, dets


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.05, 0.5, 0.7]))
def test_matches_brute_force_evaluator(seed, score_threshold):
    gt_boxes, dets = random_instance(seed)
    result = evaluate(ground_truth(gt_boxes), dets, EvalConfig(score_threshold=score_threshold))
    expected = [brute_force_ap(gt_boxes, dets, t, score_threshold) for t in EvalConfig().iou_thresholds]
    for got, want in zip(result.per_threshold_ap, expected):
        assert abs(got - want) <= 1e-9
    assert abs(result.ap - sum(expected) / len(expected)) <= 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rank_only_depends_on_score_order(seed):
    gt_boxes, dets = random_instance(seed)
    gt = ground_truth(gt_boxes)
    cubed = [Detection(d.image_id, 1, d.score ** 3, d.bbox) for d in dets]
    shuffled = list(dets)
    random.Random(seed).shuffle(shuffled)
    base = evaluate(gt, dets)
    for other in (evaluate(gt, cubed), evaluate(gt, shuffled)):
        assert other.ap == pytest.approx(base.ap, abs=1e-12)
        assert other.ap50 == pytest.approx(base.ap50, abs=1e-12)
