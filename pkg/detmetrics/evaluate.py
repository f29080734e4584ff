"""COCO-style average precision for person detections.

Per image, detections below the score threshold are dropped before matching,
the rest are ranked by score (ties by input index) and truncated to the
per-image maximum. At every IoU threshold each detection in rank order takes
the unmatched ground truth of highest IoU at or above the threshold (lowest
index on equal IoU). Precision/recall is accumulated over all images in
global rank order, turned into its upper envelope and sampled at evenly
spaced recall points. Single area range, no crowd handling.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from dataset.coco import PERSON_CATEGORY_ID, CocoDataset
from detmetrics.iou import bbox_iou_matrix, mask_iou_matrix
from gtrender.masks import DimensionMismatch, InstanceMask
from utils.errors import DataError, UsageError

logger = logging.getLogger(__name__)

IouType = Literal["bbox", "mask"]
COCO_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


class UnknownImage(DataError):
    code = "UNKNOWN_IMAGE"


class BadCategory(DataError):
    code = "BAD_CATEGORY"


class BadDetection(DataError):
    code = "BAD_DETECTION"


class BadEvalConfig(UsageError):
    code = "BAD_EVAL_CONFIG"


@dataclass(frozen=True, eq=False)
class Detection:
    image_id: int
    category_id: int
    score: float
    bbox: tuple[float, float, float, float]
    segmentation: Optional[InstanceMask] = None


@dataclass(frozen=True)
class EvalConfig:
    iou_type: IouType = "bbox"
    iou_thresholds: tuple[float, ...] = COCO_IOU_THRESHOLDS
    score_threshold: float = 0.0
    max_detections: int = 100
    recall_points: int = 101

    def validate(self) -> None:
        if self.iou_type not in ("bbox", "mask"):
            raise BadEvalConfig(f"unknown IoU type '{self.iou_type}'")
        t = self.iou_thresholds
        if not t or any(not 0.0 < v <= 1.0 for v in t) or any(b <= a for a, b in zip(t, t[1:])):
            raise BadEvalConfig(f"IoU thresholds must be strictly increasing in (0, 1], got {list(t)}")
        if not 0.0 <= self.score_threshold <= 1.0:
            raise BadEvalConfig(f"score threshold must be in [0, 1], got {self.score_threshold!r}")
        if self.max_detections < 1:
            raise BadEvalConfig(f"max detections must be positive, got {self.max_detections}")
        if self.recall_points < 2:
            raise BadEvalConfig(f"need at least 2 recall points, got {self.recall_points}")


@dataclass(frozen=True, eq=False)
class PrCurve:
    iou_threshold: float
    recall: np.ndarray
    precision: np.ndarray
    ap: float


@dataclass(frozen=True, eq=False)
class EvalResult:
    ap: float
    ap50: float
    curves: tuple[PrCurve, ...] = field(default=())
    iou_type: IouType = "bbox"
    score_threshold: float = 0.0

    @property
    def per_threshold_ap(self) -> tuple[float, ...]:
        return tuple(c.ap for c in self.curves)


def _check_detections(gt: CocoDataset, dets: Sequence[Detection], cfg: EvalConfig) -> None:
    images = {image.id: image for image in gt.images}
    for index, det in enumerate(dets):
        image = images.get(det.image_id)
        if image is None:
            raise UnknownImage(f"detection {index} references image {det.image_id}, absent from the ground truth")
        if det.category_id != PERSON_CATEGORY_ID:
            raise BadCategory(f"detection {index} has category {det.category_id}; only person ({PERSON_CATEGORY_ID}) is evaluated")
        if not (math.isfinite(det.score) and 0.0 <= det.score <= 1.0):
            raise BadDetection(f"detection {index} score {det.score!r} is not in [0, 1]")
        if len(det.bbox) != 4 or det.bbox[2] < 0 or det.bbox[3] < 0:
            raise BadDetection(f"detection {index} bbox {list(det.bbox)} is not a valid [x, y, w, h]")
        if det.segmentation is not None and det.segmentation.pixels.shape != (image.height, image.width):
            raise DimensionMismatch(f"detection {index} mask does not match image {det.image_id}")
        if cfg.iou_type == "mask" and det.segmentation is None:
            raise BadDetection(f"detection {index} has no segmentation for mask evaluation")


def _match_image(ious: np.ndarray, thresholds: Sequence[float]) -> np.ndarray:
    """``(thresholds, detections)`` boolean true-positive table for one image."""
    tp = np.zeros((len(thresholds), ious.shape[0]), dtype=bool)
    for k, threshold in enumerate(thresholds):
        taken = np.zeros(ious.shape[1], dtype=bool)
        for d in range(ious.shape[0]):
            candidates = np.where(taken | (ious[d] < threshold), -1.0, ious[d])
            if candidates.size and candidates.max() >= 0.0:
                g = int(np.argmax(candidates))
                taken[g] = True
                tp[k, d] = True
    return tp


def interpolated_ap(tp: np.ndarray, n_gt: int, recall_points: int) -> tuple[float, np.ndarray, np.ndarray]:
    """AP of one rank-ordered true-positive vector; returns ``(ap, recall, envelope precision)``."""
    tps = np.cumsum(tp, dtype=np.float64)
    fps = np.cumsum(~tp, dtype=np.float64)
    recall = tps / n_gt
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(tps + fps > 0, tps / (tps + fps), 0.0)
    if precision.size == 0:
        return 0.0, recall, precision
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, np.linspace(0.0, 1.0, recall_points), side="left")
    sampled = np.append(envelope, 0.0)[idx]
    return float(np.mean(sampled)), recall, envelope


def evaluate(gt: CocoDataset, dets: Sequence[Detection], cfg: EvalConfig = EvalConfig()) -> EvalResult:
    cfg.validate()
    _check_detections(gt, dets, cfg)

    gt_by_image = gt.annotations_by_image()
    n_gt = sum(1 for a in gt.annotations if a.category_id == PERSON_CATEGORY_ID)

    per_image: dict[int, list[int]] = {}
    for index, det in enumerate(dets):
        if det.score >= cfg.score_threshold:
            per_image.setdefault(det.image_id, []).append(index)

    kept: list[int] = []
    tp_columns: list[np.ndarray] = []
    for image_id, indices in per_image.items():
        ranked = sorted(indices, key=lambda i: (-dets[i].score, i))[: cfg.max_detections]
        anns = [a for a in gt_by_image.get(image_id, []) if a.category_id == PERSON_CATEGORY_ID]
        if cfg.iou_type == "bbox":
            ious = bbox_iou_matrix([dets[i].bbox for i in ranked], [a.bbox for a in anns])
        else:
            ious = mask_iou_matrix([dets[i].segmentation for i in ranked], [a.mask() for a in anns])
        kept.extend(ranked)
        tp_columns.append(_match_image(ious, cfg.iou_thresholds))

    thresholds = cfg.iou_thresholds
    if kept:
        tp_table = np.concatenate(tp_columns, axis=1)
        order = sorted(range(len(kept)), key=lambda j: (-dets[kept[j]].score, kept[j]))
        tp_table = tp_table[:, order]
    else:
        tp_table = np.zeros((len(thresholds), 0), dtype=bool)

    if n_gt == 0:
        logger.warning("Ground truth holds no person annotations; reporting AP = AP50 = 0")
        curves = tuple(PrCurve(t, np.zeros(0), np.zeros(0), 0.0) for t in thresholds)
    else:
        curves = []
        for k, t in enumerate(thresholds):
            ap_at_t, recall, envelope = interpolated_ap(tp_table[k], n_gt, cfg.recall_points)
            curves.append(PrCurve(t, recall, envelope, ap_at_t))
    curves = tuple(curves)
    ap = float(np.mean([c.ap for c in curves]))
    ap50 = next((c.ap for c in curves if math.isclose(c.iou_threshold, 0.5)), float("nan"))
    logger.debug(f"{cfg.iou_type} AP={ap:.4f} AP50={ap50:.4f} at score >= {cfg.score_threshold} over {len(kept)} detections")
    return EvalResult(ap, ap50, curves, cfg.iou_type, cfg.score_threshold)


@dataclass(frozen=True)
class ReportRow:
    task: IouType
    score_threshold: float
    ap: float
    ap50: float

    def to_dict(self) -> dict:
        return {"task": self.task, "score_threshold": self.score_threshold, "ap": self.ap, "ap50": self.ap50}


def report_configs(score_thresholds: Sequence[float], tasks: Sequence[IouType] = ("bbox", "mask")) -> list[EvalConfig]:
    return [EvalConfig(iou_type=task, score_threshold=float(s)) for task in tasks for s in score_thresholds]


def threshold_report(gt: CocoDataset, dets: Sequence[Detection], configs: Sequence[EvalConfig]) -> list[ReportRow]:
    """One row per config, in the given order."""
    rows = []
    for cfg in configs:
        result = evaluate(gt, dets, cfg)
        rows.append(ReportRow(cfg.iou_type, cfg.score_threshold, result.ap, result.ap50))
    return rows
