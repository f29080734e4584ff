"""Prediction files in the COCO results schema, and report output."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Sequence

from dataset.coco import IoFailure
from dataset.rle import BadCounts
from detmetrics.evaluate import Detection, ReportRow
from gtrender.masks import InstanceMask
from utils.errors import DataError

logger = logging.getLogger(__name__)


class ParseError(DataError):
    code = "PARSE_ERROR"

    def __init__(self, message: str, line: int, column: int, pos: int):
        super().__init__(f"line {line} column {column} (byte {pos}): {message}", line=line, column=column, pos=pos)
        self.line = line
        self.column = column
        self.pos = pos


class BadPrediction(DataError):
    code = "BAD_PREDICTION"


def _detection(entry: object, index: int) -> Detection:
    if not isinstance(entry, dict):
        raise BadPrediction(f"prediction {index} is not an object")
    try:
        bbox = tuple(float(v) for v in entry["bbox"])
        segmentation = None
        if entry.get("segmentation") is not None:
            rle = entry["segmentation"]
            if isinstance(rle.get("counts"), str):
                raise BadPrediction(f"prediction {index}: compressed RLE strings are not supported")
            segmentation = InstanceMask.from_rle(rle)
        return Detection(int(entry["image_id"]), int(entry["category_id"]), float(entry["score"]), bbox, segmentation)
    except KeyError as e:
        raise BadPrediction(f"prediction {index} lacks field {e.args[0]!r}") from e
    except (TypeError, ValueError, AttributeError) as e:
        raise BadPrediction(f"prediction {index} is malformed: {e}") from e
    except BadCounts as e:
        raise BadPrediction(f"prediction {index} segmentation: {e.message}") from e


def parse_predictions(text: str) -> list[Detection]:
    try:
        entries = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, e.lineno, e.colno, len(text[: e.pos].encode("utf-8"))) from e
    if not isinstance(entries, list):
        raise BadPrediction("predictions must be a JSON array")
    return [_detection(entry, i) for i, entry in enumerate(entries)]


def load_predictions(path: str | Path) -> list[Detection]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot read predictions {path}: {e}") from e
    detections = parse_predictions(text)
    logger.info(f"Loaded {len(detections)} predictions from {path}")
    return detections


def write_results(path: str | Path, rows: Sequence[ReportRow]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps([row.to_dict() for row in rows], sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def format_report(rows: Sequence[ReportRow]) -> str:
    lines = [f"{'task':<6} {'thr':>6} {'AP':>8} {'AP50':>8}"]
    for row in rows:
        lines.append(f"{row.task:<6} {row.score_threshold:>6.2f} {row.ap:>8.4f} {row.ap50:>8.4f}")
    return "\n".join(lines)
