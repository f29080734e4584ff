"""``evaluate`` and ``stats``: read-only commands over written files."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Literal, Optional, Sequence

from dataset.coco import parse_coco
from dataset.stats import DatasetStats, dataset_stats
from detmetrics.evaluate import ReportRow, report_configs, threshold_report
from detmetrics.predictions import load_predictions, write_results
from utils.errors import UsageError
from utils.telemetry import get_tracer

logger = logging.getLogger(__name__)
tracer = get_tracer(__name__)

Task = Literal["bbox", "mask", "both"]
DEFAULT_THRESHOLDS = (0.7, 0.05)


class BadThresholds(UsageError):
    code = "BAD_THRESHOLDS"


def parse_thresholds(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise BadThresholds(f"thresholds must be comma-separated numbers, got '{text}'") from None
    if not values or any(not 0.0 <= v <= 1.0 for v in values):
        raise BadThresholds(f"thresholds must lie in [0, 1], got '{text}'")
    return values


def cmd_evaluate(
    gt_path: str | Path,
    predictions_path: str | Path,
    task: Task = "both",
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    results_path: Optional[str | Path] = None,
) -> list[ReportRow]:
    tasks = ("bbox", "mask") if task == "both" else (task,)
    with tracer.start_as_current_span("evaluate.task") as span:
        span.set_attribute("task", task)
        gt = parse_coco(gt_path)
        detections = load_predictions(predictions_path)
        rows = threshold_report(gt, detections, report_configs(thresholds, tasks))
    if results_path is not None:
        write_results(results_path, rows)
        logger.info(f"Wrote {len(rows)} result rows to {results_path}")
    return rows


def cmd_stats(dataset_dir: str | Path) -> dict:
    """Stats of ``annotations/instances_{train,val}.json`` under ``dataset_dir``."""
    annotations = Path(dataset_dir) / "annotations"
    report: dict[str, dict] = {}
    total = DatasetStats()
    for split in ("train", "val"):
        stats = dataset_stats(parse_coco(annotations / f"instances_{split}.json"))
        report[split] = stats.to_dict()
        total = total + stats
    report["total"] = total.to_dict()
    return report
