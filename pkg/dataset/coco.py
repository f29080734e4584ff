"""COCO instance-annotation datasets: in-memory model, canonical JSON and export.

Only people are annotated (category 1, "person"). Images with no visible
person are kept as background entries with zero annotations. Image entries
carry the applied ``exposure`` and ``readout``; annotations carry the
``experiment`` and ``frame`` they came from.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np
from PIL import Image

from dataset.rle import BadCounts, decode_rle, encode_rle
from dataset.split import SplitAssignment
from gtrender.masks import BBox, InstanceMask, bbox_from_mask
from utils.errors import DataError, InvariantViolation

logger = logging.getLogger(__name__)

PERSON_CATEGORY_ID = 1
CATEGORIES = ({"id": PERSON_CATEGORY_ID, "name": "person", "supercategory": "person"},)


class IoFailure(DataError):
    code = "IO_FAILURE"


class CocoInvariantViolation(InvariantViolation):
    code = "COCO_INVARIANT"


@dataclass(frozen=True)
class CocoImage:
    id: int
    file_name: str
    width: int
    height: int
    exposure: Optional[float] = None
    readout: Optional[float] = None

    def to_dict(self) -> dict:
        record: dict[str, Any] = {"id": self.id, "file_name": self.file_name, "width": self.width, "height": self.height}
        if self.exposure is not None:
            record["exposure"] = self.exposure
        if self.readout is not None:
            record["readout"] = self.readout
        return record


@dataclass(frozen=True)
class CocoAnnotation:
    id: int
    image_id: int
    category_id: int
    bbox: tuple[int, int, int, int]
    counts: tuple[int, ...]
    size: tuple[int, int]
    area: int
    iscrowd: int = 0
    experiment: str = ""
    frame: int = -1

    def mask(self) -> np.ndarray:
        return decode_rle(self.counts, self.size)

    def to_dict(self) -> dict:
        record = {
            "id": self.id,
            "image_id": self.image_id,
            "category_id": self.category_id,
            "bbox": list(self.bbox),
            "segmentation": {"size": list(self.size), "counts": list(self.counts)},
            "area": self.area,
            "iscrowd": self.iscrowd,
        }
        if self.experiment:
            record["experiment"] = self.experiment
            record["frame"] = self.frame
        return record


@dataclass(frozen=True)
class CocoDataset:
    images: tuple[CocoImage, ...] = ()
    annotations: tuple[CocoAnnotation, ...] = ()
    categories: tuple[dict, ...] = field(default=CATEGORIES)

    def annotations_by_image(self) -> dict[int, list[CocoAnnotation]]:
        grouped: dict[int, list[CocoAnnotation]] = {image.id: [] for image in self.images}
        for ann in self.annotations:
            grouped.setdefault(ann.image_id, []).append(ann)
        return grouped

    def image(self, image_id: int) -> Optional[CocoImage]:
        return next((image for image in self.images if image.id == image_id), None)

    def to_dict(self) -> dict:
        return {
            "images": [image.to_dict() for image in self.images],
            "annotations": [ann.to_dict() for ann in self.annotations],
            "categories": [dict(c) for c in self.categories],
        }

    def validate(self) -> None:
        """Raise CocoInvariantViolation on the first broken invariant."""
        image_ids = [image.id for image in self.images]
        if len(set(image_ids)) != len(image_ids):
            raise CocoInvariantViolation("duplicate image ids")
        ann_ids = [ann.id for ann in self.annotations]
        if len(set(ann_ids)) != len(ann_ids):
            raise CocoInvariantViolation("duplicate annotation ids")
        images = {image.id: image for image in self.images}
        for ann in self.annotations:
            image = images.get(ann.image_id)
            if image is None:
                raise CocoInvariantViolation(f"annotation {ann.id} references missing image {ann.image_id}")
            if tuple(ann.size) != (image.height, image.width):
                raise CocoInvariantViolation(f"annotation {ann.id} mask size {ann.size} differs from its image")
            try:
                pixels = ann.mask()
            except BadCounts as e:
                raise CocoInvariantViolation(f"annotation {ann.id}: {e.message}") from e
            if int(pixels.sum()) != ann.area:
                raise CocoInvariantViolation(f"annotation {ann.id} area {ann.area} differs from its mask")
            if not pixels.any() or bbox_from_mask(pixels).to_list() != list(ann.bbox):
                raise CocoInvariantViolation(f"annotation {ann.id} bbox is not the tight bounds of its mask")


def coco_from_dict(record: dict) -> CocoDataset:
    try:
        images = tuple(
            CocoImage(int(i["id"]), str(i["file_name"]), int(i["width"]), int(i["height"]),
                      i.get("exposure"), i.get("readout"))
            for i in record["images"]
        )
        annotations = tuple(
            CocoAnnotation(
                id=int(a["id"]),
                image_id=int(a["image_id"]),
                category_id=int(a["category_id"]),
                bbox=tuple(int(v) for v in a["bbox"]),
                counts=tuple(int(v) for v in a["segmentation"]["counts"]),
                size=tuple(int(v) for v in a["segmentation"]["size"]),
                area=int(a["area"]),
                iscrowd=int(a.get("iscrowd", 0)),
                experiment=str(a.get("experiment", "")),
                frame=int(a.get("frame", -1)),
            )
            for a in record["annotations"]
        )
        categories = tuple(dict(c) for c in record.get("categories", CATEGORIES))
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed COCO record: {e!r}") from e
    return CocoDataset(images, annotations, categories)


def coco_to_json(dataset: CocoDataset) -> str:
    """Canonical text: sorted keys, no whitespace, shortest round-trip floats."""
    return json.dumps(dataset.to_dict(), sort_keys=True, separators=(",", ":"))


def write_coco(path: str | Path, dataset: CocoDataset) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(coco_to_json(dataset) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def parse_coco(path: str | Path) -> CocoDataset:
    path = Path(path)
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise DataError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    return coco_from_dict(record)


@dataclass(frozen=True, eq=False)
class ExportSample:
    """One processed frame ready for export; ``people`` holds the person masks only."""

    experiment: str
    frame: int
    rgb: np.ndarray
    people: tuple[tuple[int, InstanceMask, BBox], ...]
    exposure: Optional[float] = None
    readout: Optional[float] = None

    @property
    def key(self) -> tuple[str, int]:
        return self.experiment, self.frame

    @property
    def file_name(self) -> str:
        return f"{self.experiment}_{self.frame:06d}.png"


def build_coco(samples: Iterable[ExportSample]) -> CocoDataset:
    """Number images and annotations in ``(experiment, frame)`` order."""
    images, annotations = [], []
    for image_id, sample in enumerate(sorted(samples, key=lambda s: s.key), start=1):
        height, width = sample.rgb.shape[:2]
        images.append(CocoImage(image_id, sample.file_name, width, height, sample.exposure, sample.readout))
        for _, mask, box in sample.people:
            annotations.append(CocoAnnotation(
                id=len(annotations) + 1,
                image_id=image_id,
                category_id=PERSON_CATEGORY_ID,
                bbox=tuple(box.to_list()),
                counts=tuple(encode_rle(mask.pixels)),
                size=(height, width),
                area=mask.area,
                experiment=sample.experiment,
                frame=sample.frame,
            ))
    dataset = CocoDataset(tuple(images), tuple(annotations))
    dataset.validate()
    return dataset


def select_images(dataset: CocoDataset, image_ids: Sequence[int]) -> CocoDataset:
    keep = set(image_ids)
    return CocoDataset(
        tuple(image for image in dataset.images if image.id in keep),
        tuple(ann for ann in dataset.annotations if ann.image_id in keep),
        dataset.categories,
    )


def export_coco(samples: Sequence[ExportSample], split: SplitAssignment, output_dir: str | Path) -> tuple[CocoDataset, CocoDataset]:
    """Write ``images/`` and ``annotations/instances_{train,val}.json`` under ``output_dir``.

    ``split`` assigns image ids of the dataset built from ``samples``.
    """
    output_dir = Path(output_dir)
    dataset = build_coco(samples)
    by_name = {s.file_name: s for s in samples}
    image_dir = output_dir / "images"
    try:
        image_dir.mkdir(parents=True, exist_ok=True)
        for image in dataset.images:
            Image.fromarray(np.ascontiguousarray(by_name[image.file_name].rgb, dtype=np.uint8)).save(image_dir / image.file_name)
    except OSError as e:
        raise IoFailure(f"cannot write images under {image_dir}: {e}") from e
    train = select_images(dataset, split.train)
    val = select_images(dataset, split.val)
    write_coco(output_dir / "annotations" / "instances_train.json", train)
    write_coco(output_dir / "annotations" / "instances_val.json", val)
    logger.info(f"Exported {len(train.images)} train / {len(val.images)} val images to {output_dir}")
    return train, val
