"""Blur-consistent masks and boxes: the union of an instance over every subframe."""

from __future__ import annotations

from typing import Sequence

from gtrender.masks import BBox, DimensionMismatch, InstanceMask, bbox_from_mask, union_masks
from utils.errors import UsageError

MaskSet = Sequence[tuple[int, InstanceMask]]


class NoSubframes(UsageError):
    code = "NO_SUBFRAMES"


def correct_annotations(subframe_masks: Sequence[MaskSet]) -> tuple[tuple[tuple[int, InstanceMask], ...], tuple[tuple[int, BBox], ...]]:
    """Per-instance union over subframes, in instance id order.

    Instances absent from every subframe do not appear.
    """
    if not subframe_masks:
        raise NoSubframes("annotation correction needs at least one subframe")
    shape = None
    collected: dict[int, list[InstanceMask]] = {}
    for masks in subframe_masks:
        for instance_id, mask in masks:
            if shape is None:
                shape = mask.pixels.shape
            elif mask.pixels.shape != shape:
                raise DimensionMismatch(f"subframe mask shape {mask.pixels.shape} differs from {shape}")
            collected.setdefault(int(instance_id), []).append(mask)
    corrected = tuple((i, union_masks(collected[i])) for i in sorted(collected))
    boxes = tuple((i, bbox_from_mask(mask)) for i, mask in corrected)
    return corrected, boxes
