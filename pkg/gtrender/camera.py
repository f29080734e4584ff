"""Pinhole camera model and primary-ray generation.

Image axes follow the usual computer-vision convention: x right, y down,
z along the optical axis. The camera is mounted on the body frame (x forward,
y left, z up) looking along body x.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from geomesh.mesh import Transform
from utils.errors import UsageError


class BadCamera(UsageError):
    code = "BAD_CAMERA"


# Columns are the camera axes expressed in body coordinates.
BODY_FROM_CAMERA = np.array([
    [0.0, 0.0, 1.0],
    [-1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
])


@dataclass(frozen=True)
class CameraModel:
    width: int
    height: int
    fx: float
    fy: float
    cx: Optional[float] = None
    cy: Optional[float] = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise BadCamera(f"image size must be positive, got {self.width}x{self.height}")
        if not (self.fx > 0 and self.fy > 0):
            raise BadCamera(f"focal lengths must be positive, got fx={self.fx!r} fy={self.fy!r}")
        if self.cx is None:
            object.__setattr__(self, "cx", self.width / 2.0)
        if self.cy is None:
            object.__setattr__(self, "cy", self.height / 2.0)

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    @staticmethod
    def from_fov(width: int, height: int, horizontal_fov: float) -> "CameraModel":
        """Square pixels with the given horizontal field of view in radians."""
        f = (width / 2.0) / np.tan(horizontal_fov / 2.0)
        return CameraModel(width, height, f, f)

    def pixel_directions(self, rows: Optional[np.ndarray] = None) -> np.ndarray:
        """Unit ray directions in the camera frame through pixel centers.

        Returns ``(len(rows) * width, 3)`` in row-major order; all rows when
        ``rows`` is None.
        """
        rows = np.arange(self.height) if rows is None else np.asarray(rows)
        r, c = np.meshgrid(rows, np.arange(self.width), indexing="ij")
        x = (c.ravel() + 0.5 - self.cx) / self.fx
        y = (r.ravel() + 0.5 - self.cy) / self.fy
        d = np.column_stack([x, y, np.ones_like(x)])
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    def project(self, points_cam: np.ndarray) -> np.ndarray:
        """Continuous pixel coordinates ``(u, v)`` of camera-frame points."""
        p = np.asarray(points_cam, dtype=np.float64).reshape(-1, 3)
        return np.column_stack([self.fx * p[:, 0] / p[:, 2] + self.cx, self.fy * p[:, 1] / p[:, 2] + self.cy])


def world_rays(camera: CameraModel, pose: Transform, rows: Optional[np.ndarray] = None):
    """Origins, unit world directions and camera-frame z components of the primary rays."""
    d_cam = camera.pixel_directions(rows)
    rot = pose.as_rotation().as_matrix() @ BODY_FROM_CAMERA
    d_world = d_cam @ rot.T
    origins = np.broadcast_to(pose.translation, d_world.shape)
    return origins, d_world, d_cam[:, 2]


def world_to_camera(pose: Transform, points: np.ndarray) -> np.ndarray:
    body = pose.inverse().apply(points)
    return body @ BODY_FROM_CAMERA
