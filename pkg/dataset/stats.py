"""Counts reports and seeded subsets of COCO datasets."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from dataset.coco import CocoDataset, select_images
from utils.errors import UsageError
from utils.seeding import stream


class BadSubsetSize(UsageError):
    code = "BAD_SUBSET_SIZE"


@dataclass(frozen=True)
class DatasetStats:
    images: int = 0
    images_with_humans: int = 0
    background_images: int = 0
    annotations: int = 0
    # annotations per image -> number of images
    histogram: dict[int, int] = field(default_factory=dict)

    def __add__(self, other: "DatasetStats") -> "DatasetStats":
        histogram = Counter(self.histogram)
        histogram.update(other.histogram)
        return DatasetStats(
            self.images + other.images,
            self.images_with_humans + other.images_with_humans,
            self.background_images + other.background_images,
            self.annotations + other.annotations,
            dict(sorted(histogram.items())),
        )

    def to_dict(self) -> dict:
        return {
            "images": self.images,
            "images_with_humans": self.images_with_humans,
            "background_images": self.background_images,
            "annotations": self.annotations,
            "annotations_per_image": {str(k): v for k, v in self.histogram.items()},
        }


def dataset_stats(dataset: CocoDataset) -> DatasetStats:
    per_image = Counter(len(anns) for anns in dataset.annotations_by_image().values())
    background = per_image.get(0, 0)
    return DatasetStats(
        images=len(dataset.images),
        images_with_humans=len(dataset.images) - background,
        background_images=background,
        annotations=len(dataset.annotations),
        histogram=dict(sorted(per_image.items())),
    )


def subset_dataset(dataset: CocoDataset, count: int, seed: int) -> CocoDataset:
    """``count`` images drawn without replacement, kept in their original order."""
    if not 0 <= count <= len(dataset.images):
        raise BadSubsetSize(f"subset size {count} outside [0, {len(dataset.images)}]")
    picked = stream(seed, "subset").choice(len(dataset.images), size=count, replace=False)
    return select_images(dataset, [dataset.images[int(i)].id for i in picked])
