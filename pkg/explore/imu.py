"""Synthetic IMU readings derived from a sampled trajectory.

Convention: gyro is the body-frame angular velocity in rad/s; the
accelerometer reports specific force ``R^T (a_world - g)`` in m/s^2 with
``g = (0, 0, -9.81)``, so a body at rest reads ``(0, 0, +9.81)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from explore.trajectory import Trajectory, TrajectoryFormatError, read_numeric_table
from utils.errors import DataError

GRAVITY = np.array([0.0, 0.0, -9.81])


class TooShort(DataError):
    code = "TRAJECTORY_TOO_SHORT"


@dataclass(frozen=True, eq=False)
class ImuSeries:
    """One sample per trajectory pose."""

    timestamps: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray

    def __len__(self) -> int:
        return len(self.timestamps)

    def sample(self, index: int) -> tuple[float, np.ndarray, np.ndarray]:
        return float(self.timestamps[index]), self.gyro[index], self.accel[index]


def _fill_ends(values: np.ndarray) -> np.ndarray:
    values[0] = values[1]
    values[-1] = values[-2]
    return values


def derive_imu(traj: Trajectory) -> ImuSeries:
    """Central differences at interior samples; the two end samples copy their neighbor."""
    n = len(traj)
    if n < 3:
        raise TooShort(f"IMU derivation needs at least 3 poses, got {n}")
    dt = 1.0 / traj.fps
    p = traj.positions
    accel_world = np.zeros((n, 3))
    accel_world[1:-1] = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / (dt * dt)
    accel_world = _fill_ends(accel_world)

    rotations = traj.rotations()
    gyro = np.zeros((n, 3))
    relative = rotations[:-2].inv() * rotations[2:]
    gyro[1:-1] = relative.as_rotvec() / (2.0 * dt)
    gyro = _fill_ends(gyro)

    specific_force = rotations.inv().apply(accel_world - GRAVITY)
    return ImuSeries(traj.timestamps, gyro, specific_force)


def write_imu(path: str | Path, imu: ImuSeries) -> None:
    lines = ["# t gx gy gz ax ay az"]
    for t, g, a in zip(imu.timestamps, imu.gyro, imu.accel):
        lines.append(" ".join(repr(float(v)) for v in (t, *g, *a)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_imu(path: str | Path) -> ImuSeries:
    _, table = read_numeric_table(Path(path), 7)
    if not np.all(np.isfinite(table)):
        raise TrajectoryFormatError(f"{path}: non-finite IMU value")
    return ImuSeries(table[:, 0], table[:, 1:4], table[:, 4:7])
