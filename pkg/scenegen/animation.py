"""Animation tracks and time-indexed instance geometry.

Two kinds of track exist:

* ``mesh_sequence``: per-frame vertex arrays sharing one triangle list, played
  at ``rate`` Hz and looped (frame ``round(t * rate) mod F``) so a short clip
  covers any experiment length.
* ``rigid_keyframes``: timestamped poses, linear in position and spherical
  linear in rotation between keyframes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal, Optional

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from geomesh.mesh import Transform, TriangleMesh
from utils.errors import DataError, UsageError

if TYPE_CHECKING:
    from scenegen.assets import AssetInstance

logger = logging.getLogger(__name__)

TIME_TOLERANCE = 1e-9

TrackKind = Literal["mesh_sequence", "rigid_keyframes"]


class OutOfRange(UsageError):
    code = "OUT_OF_RANGE"


class BadTrack(DataError):
    code = "BAD_TRACK"


@dataclass(frozen=True, eq=False)
class AnimationTrack:
    kind: TrackKind
    duration: float
    rate: float = 0.0
    frames: Optional[np.ndarray] = None
    triangles: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None
    positions: Optional[np.ndarray] = None
    rotations: Optional[np.ndarray] = None

    @staticmethod
    def mesh_sequence(frames: np.ndarray, triangles: np.ndarray, rate: float, duration: float) -> "AnimationTrack":
        frames = np.array(frames, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[0] < 1 or frames.shape[2] != 3:
            raise BadTrack(f"mesh sequence frames must be (F, V, 3), got {frames.shape}")
        if not rate > 0:
            raise BadTrack(f"mesh sequence rate must be positive, got {rate!r}")
        triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        frames.setflags(write=False)
        triangles.setflags(write=False)
        return AnimationTrack("mesh_sequence", float(duration), float(rate), frames=frames, triangles=triangles)

    @staticmethod
    def rigid_keyframes(times, positions, rotations) -> "AnimationTrack":
        """``rotations`` are unit quaternions in w-x-y-z order."""
        times = np.array(times, dtype=np.float64).reshape(-1)
        positions = np.array(positions, dtype=np.float64).reshape(-1, 3)
        rotations = np.array(rotations, dtype=np.float64).reshape(-1, 4)
        if len(times) < 1 or len(times) != len(positions) or len(times) != len(rotations):
            raise BadTrack("keyframe times, positions and rotations must have equal non-zero length")
        if np.any(np.diff(times) <= 0):
            raise BadTrack("keyframe timestamps must be strictly increasing")
        for array in (times, positions, rotations):
            array.setflags(write=False)
        return AnimationTrack(
            "rigid_keyframes", float(times[-1]), times=times, positions=positions, rotations=rotations,
        )

    @property
    def frame_count(self) -> int:
        return len(self.frames) if self.kind == "mesh_sequence" else len(self.times)

    def check_time(self, t: float) -> None:
        if not (-TIME_TOLERANCE <= t <= self.duration + TIME_TOLERANCE):
            raise OutOfRange(f"time {t!r} s is outside track duration [0, {self.duration!r}] s")

    def frame_index(self, t: float) -> int:
        self.check_time(t)
        return int(round(t * self.rate)) % len(self.frames)

    def frame_mesh(self, index: int, name: str = "") -> TriangleMesh:
        return TriangleMesh(self.frames[index], self.triangles, name)

    def transform_at(self, t: float) -> Transform:
        """Interpolated keyframe pose; exactly the keyframe at keyframe times."""
        self.check_time(t)
        t = min(max(t, float(self.times[0])), float(self.times[-1]))
        i = int(np.searchsorted(self.times, t, side="left"))
        if i < len(self.times) and self.times[i] == t:
            return Transform(self.rotations[i], self.positions[i])
        lo, hi = i - 1, i
        alpha = (t - self.times[lo]) / (self.times[hi] - self.times[lo])
        position = (1.0 - alpha) * self.positions[lo] + alpha * self.positions[hi]
        key_rotations = Rotation.from_quat(self.rotations[[lo, hi]][:, [1, 2, 3, 0]])
        rotation = Slerp([0.0, 1.0], key_rotations)([alpha])[0]
        return Transform.from_rotation(rotation, position)

    def to_dict(self) -> dict:
        if self.kind == "mesh_sequence":
            return {"kind": self.kind, "rate": self.rate, "frames": self.frame_count, "duration": self.duration}
        return {
            "kind": self.kind,
            "times": self.times.tolist(),
            "positions": self.positions.tolist(),
            "rotations": self.rotations.tolist(),
        }


def swept_mesh(base: TriangleMesh, track: AnimationTrack) -> TriangleMesh:
    """Union of the asset's geometry over every frame (or keyframe pose), in asset coordinates."""
    if track.kind == "mesh_sequence":
        parts = [track.frame_mesh(i) for i in range(track.frame_count)]
    else:
        parts = [base.transformed(Transform(q, p)) for q, p in zip(track.rotations, track.positions)]
    return TriangleMesh.concatenate(parts, name=f"{base.name}_swept")


def instance_mesh_at(instance: "AssetInstance", t: float) -> TriangleMesh:
    """World-space geometry of ``instance`` at time ``t``."""
    track = instance.track
    name = f"instance_{instance.instance_id}"
    if track.kind == "mesh_sequence":
        return track.frame_mesh(track.frame_index(t), name).transformed(instance.placement)
    world = track.transform_at(t).compose(instance.placement)
    return TriangleMesh(instance.mesh.vertices, instance.mesh.triangles, name).transformed(world)
