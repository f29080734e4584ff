"""Exposure-window motion blur.

The exact path re-renders the scene at ``N`` subframe times spread evenly
over the exposure and averages the colors. The kernel path instead shifts
one rendered frame along the image-space motion predicted from the gyro and
averages the shifted copies.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage

from gtrender.camera import CameraModel
from gtrender.masks import InstanceMask
from gtrender.render import RenderLayers
from utils.errors import UsageError

logger = logging.getLogger(__name__)

DEFAULT_SUBFRAMES = 9

# time -> layers for the full image
RenderFn = Callable[[float], RenderLayers]


class BadSubframes(UsageError):
    code = "BAD_SUBFRAMES"


@dataclass(frozen=True, eq=False)
class BlurResult:
    rgb: np.ndarray
    times: tuple[float, ...]
    subframe_masks: tuple[tuple[tuple[int, InstanceMask], ...], ...]


def subframe_times(t_mid: float, exposure: float, subframes: int) -> np.ndarray:
    if subframes < 1 or subframes % 2 == 0:
        raise BadSubframes(f"subframe count must be a positive odd number, got {subframes}")
    if exposure < 0:
        raise BadSubframes(f"exposure must be non-negative, got {exposure!r}")
    if exposure == 0 or subframes == 1:
        return np.array([t_mid])
    k = np.arange(subframes)
    times = t_mid + exposure * (k / (subframes - 1) - 0.5)
    times[subframes // 2] = t_mid
    return times


def instance_masks(instance_map: np.ndarray) -> tuple[tuple[int, InstanceMask], ...]:
    ids = [int(i) for i in np.unique(instance_map) if i != 0]
    return tuple((i, InstanceMask(instance_map == i)) for i in ids)


def average_rgb(stack: list[np.ndarray]) -> np.ndarray:
    """Mean of uint8 images computed in float64, rounded back to uint8."""
    mean = np.mean(np.stack(stack).astype(np.float64), axis=0)
    return np.clip(np.round(mean), 0, 255).astype(np.uint8)


def apply_motion_blur(render: RenderFn, t_mid: float, exposure: float, subframes: int = DEFAULT_SUBFRAMES) -> BlurResult:
    times = subframe_times(t_mid, exposure, subframes)
    layers = [render(float(t)) for t in times]
    return BlurResult(
        rgb=average_rgb([layer.rgb for layer in layers]),
        times=tuple(float(t) for t in times),
        subframe_masks=tuple(instance_masks(layer.instance) for layer in layers),
    )


def imu_pixel_displacement(camera: CameraModel, gyro: np.ndarray, exposure: float) -> tuple[float, float]:
    """Image motion ``(du, dv)`` in pixels over the exposure from body rates.

    Small-angle model: yaw rate pans the image horizontally, pitch rate
    vertically. Roll and translation are ignored.
    """
    _, wy, wz = (float(w) for w in np.asarray(gyro).reshape(3))
    return camera.fx * wz * exposure, -camera.fy * wy * exposure


def kernel_blur(layers: RenderLayers, displacement: tuple[float, float], subframes: int = DEFAULT_SUBFRAMES) -> BlurResult:
    """Average ``subframes`` copies shifted evenly along ``displacement``, centered on the input."""
    du, dv = (float(d) for d in displacement)
    offsets = subframe_times(0.0, 0.0 if du == dv == 0.0 else 1.0, subframes)
    rgb = layers.rgb.astype(np.float64)
    copies, masks = [], []
    for s in offsets:
        shift = (float(s) * dv, float(s) * du)
        if shift == (0.0, 0.0):
            copies.append(layers.rgb)
            masks.append(instance_masks(layers.instance))
            continue
        shifted = ndimage.shift(rgb, shift + (0.0,), order=1, mode="nearest")
        copies.append(np.clip(np.round(shifted), 0, 255).astype(np.uint8))
        moved = ndimage.shift(layers.instance, shift, order=0, mode="constant", cval=0)
        masks.append(instance_masks(moved))
    logger.debug(f"Kernel blur over ({du:.2f}, {dv:.2f}) px with {len(offsets)} copies")
    return BlurResult(average_rgb(copies), tuple(float(s) for s in offsets), tuple(masks))
