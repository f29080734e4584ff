"""Uncompressed COCO run-length encoding.

Pixels are visited column by column (Fortran order). Counts alternate
between runs of zeros and runs of ones, starting with zeros, so a mask whose
first pixel is set begins with a 0 count.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from utils.errors import DataError


class BadCounts(DataError):
    code = "BAD_RLE_COUNTS"


def encode_rle(mask: np.ndarray) -> list[int]:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or mask.size == 0:
        raise BadCounts(f"mask must be a non-empty 2-D array, got shape {mask.shape}")
    flat = mask.ravel(order="F")
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    counts = np.diff(np.concatenate([[0], changes, [flat.size]]))
    if flat[0]:
        counts = np.concatenate([[0], counts])
    return [int(c) for c in counts]


def decode_rle(counts: Sequence[int], size: tuple[int, int]) -> np.ndarray:
    """Decode to a ``(height, width)`` boolean mask."""
    height, width = (int(v) for v in size)
    if height <= 0 or width <= 0:
        raise BadCounts(f"mask size must be positive, got {height}x{width}")
    try:
        runs = np.asarray(counts, dtype=np.int64).reshape(-1)
    except (TypeError, ValueError):
        raise BadCounts("RLE counts must be integers") from None
    if np.any(runs < 0):
        raise BadCounts("RLE counts must be non-negative")
    if int(runs.sum()) != height * width:
        raise BadCounts(f"RLE counts sum to {int(runs.sum())}, expected {height * width}")
    values = (np.arange(len(runs)) % 2).astype(bool)
    return np.repeat(values, runs).reshape((height, width), order="F")


def rle_area(counts: Sequence[int]) -> int:
    return int(sum(counts[1::2]))
