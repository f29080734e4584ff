"""Intersection over union for boxes and masks."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from gtrender.masks import BBox, DimensionMismatch, InstanceMask

BoxLike = BBox | Sequence[float]


def _as_xywh(box: BoxLike) -> np.ndarray:
    values = box.to_list() if isinstance(box, BBox) else box
    return np.asarray(values, dtype=np.float64).reshape(4)


def iou_bbox(a: BoxLike, b: BoxLike) -> float:
    """Boxes are ``[x, y, w, h]``; disjoint or zero-area pairs give 0."""
    return float(bbox_iou_matrix([a], [b])[0, 0])


def bbox_iou_matrix(dets: Sequence[BoxLike], gts: Sequence[BoxLike]) -> np.ndarray:
    """``(len(dets), len(gts))`` IoU matrix."""
    d = np.array([_as_xywh(b) for b in dets], dtype=np.float64).reshape(-1, 4)
    g = np.array([_as_xywh(b) for b in gts], dtype=np.float64).reshape(-1, 4)
    x0 = np.maximum(d[:, None, 0], g[None, :, 0])
    y0 = np.maximum(d[:, None, 1], g[None, :, 1])
    x1 = np.minimum(d[:, None, 0] + d[:, None, 2], g[None, :, 0] + g[None, :, 2])
    y1 = np.minimum(d[:, None, 1] + d[:, None, 3], g[None, :, 1] + g[None, :, 3])
    inter = np.clip(x1 - x0, 0, None) * np.clip(y1 - y0, 0, None)
    union = (d[:, 2] * d[:, 3])[:, None] + (g[:, 2] * g[:, 3])[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(union > 0, inter / union, 0.0)


def _pixels(mask: InstanceMask | np.ndarray) -> np.ndarray:
    return mask.pixels if isinstance(mask, InstanceMask) else np.asarray(mask, dtype=bool)


def iou_mask(a: InstanceMask | np.ndarray, b: InstanceMask | np.ndarray) -> float:
    """Two empty masks give 0."""
    return float(mask_iou_matrix([a], [b])[0, 0])


def mask_iou_matrix(dets: Sequence[InstanceMask | np.ndarray], gts: Sequence[InstanceMask | np.ndarray]) -> np.ndarray:
    d = [_pixels(m) for m in dets]
    g = [_pixels(m) for m in gts]
    shapes = {m.shape for m in d + g}
    if len(shapes) > 1:
        raise DimensionMismatch(f"mask shapes differ: {sorted(shapes)}")
    if not d or not g:
        return np.zeros((len(d), len(g)))
    df = np.stack(d).reshape(len(d), -1).astype(np.float64)
    gf = np.stack(g).reshape(len(g), -1).astype(np.float64)
    inter = df @ gf.T
    union = df.sum(axis=1)[:, None] + gf.sum(axis=1)[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(union > 0, inter / union, 0.0)
