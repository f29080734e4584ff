"""One sensor-realistic frame from an ideal one."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from explore.imu import ImuSeries
from explore.trajectory import Trajectory
from gtrender.masks import BBox, InstanceMask
from gtrender.render import FrameGroundTruth, SceneRenderer
from scenegen.animation import OutOfRange
from sensor.blur import DEFAULT_SUBFRAMES, apply_motion_blur, imu_pixel_displacement, kernel_blur
from sensor.correction import correct_annotations
from sensor.exposure import ExposureModel, RollingShutterModel, sample_exposure, sample_readout
from sensor.shutter import DEFAULT_SLICES, apply_rolling_shutter
from utils.errors import InvariantViolation, UsageError

logger = logging.getLogger(__name__)

BlurMode = Literal["render", "kernel"]


class MissingImu(UsageError):
    code = "MISSING_IMU"


@dataclass(frozen=True)
class SensorSettings:
    exposure: ExposureModel = field(default_factory=ExposureModel)
    shutter: RollingShutterModel = field(default_factory=RollingShutterModel)
    subframes: int = DEFAULT_SUBFRAMES
    slices: int = DEFAULT_SLICES
    blur_mode: BlurMode = "render"
    correct_annotations: bool = True


@dataclass(frozen=True, eq=False)
class NoisyFrame:
    frame: int
    rgb: np.ndarray
    masks: tuple[tuple[int, InstanceMask], ...]
    boxes: tuple[tuple[int, BBox], ...]
    exposure: float
    readout: float
    t_mid: float


def exposure_center(t: float, exposure: float, readout: float, end_time: float) -> float:
    """Mid-exposure time, moved the least amount needed to keep the whole window inside ``[0, end_time]``."""
    span = exposure + readout
    if span > end_time:
        raise OutOfRange(f"exposure {exposure!r} s plus readout {readout!r} s exceeds the trajectory length {end_time!r} s")
    return min(max(t, exposure / 2.0), end_time - readout - exposure / 2.0)


def _check_superset(frame: FrameGroundTruth, masks) -> None:
    corrected = dict(masks)
    for instance_id, mask in frame.masks:
        union = corrected.get(instance_id)
        if union is None or np.any(mask.pixels & ~union.pixels):
            raise InvariantViolation(f"frame {frame.frame}: corrected mask of instance {instance_id} lost pixels")


def simulate_sensor_frame(
    renderer: SceneRenderer,
    trajectory: Trajectory,
    frame: FrameGroundTruth,
    settings: SensorSettings,
    seed: int,
    imu: Optional[ImuSeries] = None,
) -> NoisyFrame:
    """Blur, rolling shutter and (optionally) annotation correction for ``frame``."""
    exposure = sample_exposure(settings.exposure, seed, frame.frame)
    readout = sample_readout(settings.shutter, seed, frame.frame)
    height = renderer.camera.height

    def render_rows(t: float, rows=None):
        return renderer.render_layers(trajectory.pose_at(t), t, rows)

    def render_frame(t: float):
        return apply_rolling_shutter(render_rows, t, readout, height, settings.slices)

    t_mid = exposure_center(frame.time, exposure, readout, trajectory.end_time)
    if settings.blur_mode == "kernel":
        if imu is None:
            raise MissingImu("kernel blur needs the IMU series of the trajectory")
        displacement = imu_pixel_displacement(renderer.camera, imu.gyro[frame.frame], exposure)
        blurred = kernel_blur(render_frame(t_mid), displacement, settings.subframes)
    else:
        blurred = apply_motion_blur(render_frame, t_mid, exposure, settings.subframes)

    if settings.correct_annotations:
        masks, boxes = correct_annotations(list(blurred.subframe_masks) + [frame.masks])
        _check_superset(frame, masks)
    else:
        masks, boxes = frame.masks, frame.boxes
    logger.debug(f"Frame {frame.frame}: exposure={exposure:.4f}s readout={readout:.4f}s, {len(masks)} instances")
    return NoisyFrame(frame.frame, blurred.rgb, masks, boxes, exposure, readout, t_mid)
