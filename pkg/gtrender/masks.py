"""Instance masks and the boxes derived from them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from dataset.rle import decode_rle, encode_rle
from utils.errors import DataError


class EmptyMask(DataError):
    code = "EMPTY_MASK"


class DimensionMismatch(DataError):
    code = "DIMENSION_MISMATCH"


@dataclass(frozen=True)
class BBox:
    """Pixel box: top-left corner ``(x, y)`` and size ``(w, h)``."""

    x: int
    y: int
    w: int
    h: int

    def to_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]

    @property
    def area(self) -> int:
        return self.w * self.h


@dataclass(frozen=True, eq=False)
class InstanceMask:
    """Binary ``(height, width)`` mask."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=bool)
        if pixels.ndim != 2:
            raise DimensionMismatch(f"mask must be 2-D, got shape {pixels.shape}")
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def area(self) -> int:
        return int(self.pixels.sum())

    def rle(self) -> dict:
        return {"size": [self.height, self.width], "counts": encode_rle(self.pixels)}

    @staticmethod
    def from_rle(rle: dict) -> "InstanceMask":
        return InstanceMask(decode_rle(rle["counts"], tuple(rle["size"])))

    def __eq__(self, other) -> bool:
        return isinstance(other, InstanceMask) and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


def bbox_from_mask(mask: InstanceMask | np.ndarray) -> BBox:
    pixels = mask.pixels if isinstance(mask, InstanceMask) else np.asarray(mask, dtype=bool)
    rows = np.flatnonzero(pixels.any(axis=1))
    cols = np.flatnonzero(pixels.any(axis=0))
    if rows.size == 0:
        raise EmptyMask("cannot bound an empty mask")
    return BBox(int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))


def union_masks(masks: Iterable[InstanceMask]) -> InstanceMask:
    masks = list(masks)
    if not masks:
        raise EmptyMask("union of no masks")
    shape = masks[0].pixels.shape
    for m in masks[1:]:
        if m.pixels.shape != shape:
            raise DimensionMismatch(f"mask shapes differ: {shape} vs {m.pixels.shape}")
    return InstanceMask(np.logical_or.reduce([m.pixels for m in masks]))
