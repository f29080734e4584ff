"""On-disk layout of one ground-truth frame.

For frame ``n`` inside a directory::

    <n:06d>_instance.png|.pgm   16-bit instance ids
    <n:06d>_semantic.png|.pgm   16-bit class ids
    <n:06d>_depth.tiff          32-bit float z-depth, misses stored as 1e30
    <n:06d>_rgb.png             8-bit color proxy
    <n:06d>.json                boxes and RLE masks
    <n:06d>_rgb_<recipe>_noisy.png  sensor-processed color, written by assemble
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Literal

import numpy as np
from PIL import Image

from gtrender.masks import BBox, InstanceMask
from gtrender.render import FrameGroundTruth
from utils.errors import DataError

logger = logging.getLogger(__name__)

DEPTH_SENTINEL = 1e30

RasterFormat = Literal["png", "pgm"]


class FrameIoError(DataError):
    code = "FRAME_IO"


def frame_stem(index: int) -> str:
    return f"{index:06d}"


def _write_label_raster(path: Path, values: np.ndarray, raster_format: RasterFormat) -> Path:
    values = np.asarray(values, dtype=np.uint16)
    if raster_format == "pgm":
        path = path.with_suffix(".pgm")
        height, width = values.shape
        rows = "\n".join(" ".join(str(int(v)) for v in row) for row in values)
        path.write_text(f"P2\n{width} {height}\n65535\n{rows}\n", encoding="ascii")
    else:
        path = path.with_suffix(".png")
        Image.fromarray(values).save(path)
    return path


def _read_label_raster(stem: Path) -> np.ndarray:
    for suffix in (".png", ".pgm"):
        path = stem.with_suffix(suffix)
        if path.exists():
            with Image.open(path) as image:
                return np.asarray(image).astype(np.uint16)
    raise FrameIoError(f"missing raster {stem}.png or {stem}.pgm")


def frame_record(frame: FrameGroundTruth) -> dict:
    height, width = frame.shape
    masks = dict(frame.masks)
    return {
        "frame": frame.frame,
        "time": frame.time,
        "width": width,
        "height": height,
        "instances": [
            {"id": instance_id, "bbox": box.to_list(), "area": masks[instance_id].area,
             "segmentation": masks[instance_id].rle()}
            for instance_id, box in frame.boxes
        ],
    }


def write_frame(directory: str | Path, frame: FrameGroundTruth, raster_format: RasterFormat = "png") -> None:
    directory = Path(directory)
    stem = directory / frame_stem(frame.frame)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        _write_label_raster(Path(f"{stem}_instance"), frame.instance_map, raster_format)
        _write_label_raster(Path(f"{stem}_semantic"), frame.semantic_map, raster_format)
        depth = np.where(np.isfinite(frame.depth), frame.depth, DEPTH_SENTINEL).astype(np.float32)
        Image.fromarray(depth).save(f"{stem}_depth.tiff")
        Image.fromarray(np.ascontiguousarray(frame.rgb, dtype=np.uint8)).save(f"{stem}_rgb.png")
        Path(f"{stem}.json").write_text(json.dumps(frame_record(frame), sort_keys=True), encoding="utf-8")
    except OSError as e:
        raise FrameIoError(f"cannot write frame {frame.frame} to {directory}: {e}") from e


def read_frame(directory: str | Path, index: int) -> FrameGroundTruth:
    stem = Path(directory) / frame_stem(index)
    try:
        record = json.loads(Path(f"{stem}.json").read_text(encoding="utf-8"))
        instance_map = _read_label_raster(Path(f"{stem}_instance"))
        semantic_map = _read_label_raster(Path(f"{stem}_semantic")).astype(np.uint8)
        with Image.open(f"{stem}_depth.tiff") as image:
            depth = np.asarray(image, dtype=np.float64)
        with Image.open(f"{stem}_rgb.png") as image:
            rgb = np.asarray(image.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as e:
        raise FrameIoError(f"cannot read frame {index} from {directory}: {e}") from e
    depth = np.where(depth >= DEPTH_SENTINEL * 0.5, np.inf, depth)
    boxes = tuple((item["id"], BBox(*item["bbox"])) for item in record["instances"])
    masks = tuple((item["id"], InstanceMask.from_rle(item["segmentation"])) for item in record["instances"])
    return FrameGroundTruth(record["frame"], record["time"], instance_map, semantic_map, depth, rgb, boxes, masks)


def noisy_rgb_path(directory: str | Path, index: int, tag: str) -> Path:
    """``<n:06d>_rgb_<tag>_noisy.png``: a sensor-processed copy of frame ``n``."""
    return Path(directory) / f"{frame_stem(index)}_rgb_{tag}_noisy.png"


def write_noisy_rgb(directory: str | Path, index: int, rgb: np.ndarray, tag: str) -> Path:
    path = noisy_rgb_path(directory, index, tag)
    try:
        Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8)).save(path)
    except OSError as e:
        raise FrameIoError(f"cannot write {path}: {e}") from e
    return path
