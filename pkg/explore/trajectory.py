"""Camera trajectories sampled at a fixed rate, and their text file format.

Trajectory file, one record per frame after a ``# fps=<rate>`` header::

    <frame> <t> <x> <y> <z> <qw> <qx> <qy> <qz>

Numbers use Python's shortest round-trip ``repr`` so files are locale
independent and re-read bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from geomesh.mesh import Transform
from scenegen.animation import OutOfRange
from utils.errors import DataError


class TrajectoryFormatError(DataError):
    code = "BAD_TRAJECTORY_FILE"


def yaw_pitch_roll_to_wxyz(yaw, pitch, roll) -> np.ndarray:
    """Body frame x forward, y left, z up; positive pitch tilts the nose down."""
    rot = Rotation.from_euler("ZYX", np.stack(np.broadcast_arrays(yaw, pitch, roll), axis=-1))
    q = rot.as_quat()
    return np.concatenate([q[..., 3:], q[..., :3]], axis=-1)


@dataclass(frozen=True, eq=False)
class Trajectory:
    fps: float
    positions: np.ndarray
    orientations: np.ndarray

    def __post_init__(self):
        positions = np.array(self.positions, dtype=np.float64).reshape(-1, 3)
        orientations = np.array(self.orientations, dtype=np.float64).reshape(-1, 4)
        if len(positions) != len(orientations):
            raise DataError("trajectory positions and orientations differ in length")
        positions.setflags(write=False)
        orientations.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "orientations", orientations)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def timestamps(self) -> np.ndarray:
        return np.arange(len(self.positions)) / self.fps

    @property
    def end_time(self) -> float:
        return (len(self.positions) - 1) / self.fps

    def rotations(self) -> Rotation:
        return Rotation.from_quat(self.orientations[:, [1, 2, 3, 0]])

    def pose(self, index: int) -> Transform:
        return Transform(self.orientations[index], self.positions[index])

    def pose_at(self, t: float) -> Transform:
        """Body-to-world pose at ``t``: linear in position, slerp in rotation."""
        if not (-1e-9 <= t <= self.end_time + 1e-9):
            raise OutOfRange(f"time {t!r} s is outside the trajectory [0, {self.end_time!r}] s")
        u = min(max(t * self.fps, 0.0), float(len(self.positions) - 1))
        nearest = int(round(u))
        if abs(u - nearest) <= 1e-9:
            return self.pose(nearest)
        i = int(np.floor(u))
        alpha = u - i
        position = (1.0 - alpha) * self.positions[i] + alpha * self.positions[i + 1]
        keys = Rotation.from_quat(self.orientations[i:i + 2][:, [1, 2, 3, 0]])
        rotation = Slerp([0.0, 1.0], keys)([alpha])[0]
        return Transform.from_rotation(rotation, position)

    def channels(self) -> np.ndarray:
        """Columns x, y, z, roll, pitch, yaw."""
        yaw_pitch_roll = self.rotations().as_euler("ZYX")
        return np.column_stack([self.positions, yaw_pitch_roll[:, ::-1]])


def write_trajectory(path: str | Path, traj: Trajectory) -> None:
    lines = [f"# fps={float(traj.fps)!r}"]
    for i, (t, p, q) in enumerate(zip(traj.timestamps, traj.positions, traj.orientations)):
        values = [float(t), *map(float, p), *map(float, q)]
        lines.append(" ".join([str(i)] + [repr(v) for v in values]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_numeric_table(path: Path, columns: int) -> tuple[dict[str, str], np.ndarray]:
    header: dict[str, str] = {}
    rows = []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise TrajectoryFormatError(f"cannot read {path}: {e}") from e
    for line_no, line in enumerate(text.splitlines(), start=1):
        if line.startswith("#"):
            for item in line[1:].split():
                key, _, value = item.partition("=")
                header[key] = value
            continue
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != columns:
            raise TrajectoryFormatError(f"{path}:{line_no}: expected {columns} fields, got {len(parts)}")
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise TrajectoryFormatError(f"{path}:{line_no}: bad number") from None
    return header, np.asarray(rows, dtype=np.float64).reshape(-1, columns)


def read_trajectory(path: str | Path) -> Trajectory:
    path = Path(path)
    header, table = read_numeric_table(path, 9)
    if "fps" not in header:
        raise TrajectoryFormatError(f"{path}: missing '# fps=' header")
    return Trajectory(float(header["fps"]), table[:, 2:5], table[:, 5:9])
