"""Rolling-shutter readout: row ``r`` of ``H`` is exposed at ``t + readout * r / (H - 1)``."""

from __future__ import annotations

import logging
from typing import Callable, Optional

import numpy as np

from gtrender.render import RenderLayers
from utils.errors import UsageError

logger = logging.getLogger(__name__)

DEFAULT_SLICES = 16

# (time, rows or None for all) -> layers for those rows
RowRenderFn = Callable[[float, Optional[np.ndarray]], RenderLayers]


class BadReadout(UsageError):
    code = "BAD_READOUT"


def slice_of_rows(height: int, slices: int) -> np.ndarray:
    """Nearest temporal slice for every image row."""
    if slices < 1:
        raise BadReadout(f"slice count must be at least 1, got {slices}")
    if height == 1 or slices == 1:
        return np.zeros(height, dtype=np.int64)
    return np.rint(np.arange(height) / (height - 1) * (slices - 1)).astype(np.int64)


def slice_times(t: float, readout: float, slices: int) -> np.ndarray:
    if slices == 1:
        return np.array([t])
    return t + readout * np.arange(slices) / (slices - 1)


def apply_rolling_shutter(render: RowRenderFn, t: float, readout: float, height: int,
                          slices: int = DEFAULT_SLICES) -> RenderLayers:
    """Assemble a frame whose rows come from ``slices`` renders spread over the readout."""
    if readout < 0:
        raise BadReadout(f"readout must be non-negative, got {readout!r}")
    if readout == 0:
        return render(t, None)
    owner = slice_of_rows(height, slices)
    times = slice_times(t, readout, slices)
    parts = []
    for k in np.unique(owner):
        rows = np.flatnonzero(owner == k)
        parts.append((rows, render(float(times[k]), rows)))
    # Slices own contiguous row ranges in increasing order.
    return RenderLayers(
        instance=np.concatenate([p.instance for _, p in parts]),
        depth=np.concatenate([p.depth for _, p in parts]),
        rgb=np.concatenate([p.rgb for _, p in parts]),
    )
