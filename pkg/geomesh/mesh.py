"""Triangle meshes, rigid-plus-scale transforms and axis-aligned boxes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from utils.errors import DataError, UsageError

QUATERNION_TOLERANCE = 1e-9


class EmptyMesh(DataError):
    code = "EMPTY_MESH"


class BadTransform(UsageError):
    code = "BAD_TRANSFORM"


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle mesh in meters.

    ``vertices`` is ``(V, 3)`` float64 and ``triangles`` is ``(T, 3)`` int64.
    Triangles reference distinct vertex indices.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    name: str = ""
    dropped_degenerate: int = 0

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if triangles.size:
            if triangles.min() < 0 or triangles.max() >= len(vertices):
                raise DataError(f"mesh '{self.name}' has a triangle index out of range")
            if np.any((triangles[:, 0] == triangles[:, 1])
                      | (triangles[:, 1] == triangles[:, 2])
                      | (triangles[:, 0] == triangles[:, 2])):
                raise DataError(f"mesh '{self.name}' has a triangle with repeated vertex indices")
        vertices.setflags(write=False)
        triangles.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    def corners(self) -> np.ndarray:
        """Triangle corner positions as ``(T, 3, 3)``."""
        return self.vertices[self.triangles]

    def face_normals(self) -> np.ndarray:
        """Unit face normals following the right-hand winding rule."""
        tri = self.corners()
        normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        lengths = np.linalg.norm(normals, axis=1, keepdims=True)
        return np.divide(normals, lengths, out=np.zeros_like(normals), where=lengths > 0)

    def bounds(self) -> "Aabb":
        if len(self.vertices) == 0:
            raise EmptyMesh(f"mesh '{self.name}' has no vertices")
        used = self.vertices[np.unique(self.triangles)] if self.triangles.size else self.vertices
        return Aabb(used.min(axis=0), used.max(axis=0))

    def transformed(self, transform: "Transform") -> "TriangleMesh":
        return TriangleMesh(transform.apply(self.vertices), self.triangles, self.name, self.dropped_degenerate)

    def with_vertices(self, vertices: np.ndarray) -> "TriangleMesh":
        return TriangleMesh(vertices, self.triangles, self.name, self.dropped_degenerate)

    @staticmethod
    def concatenate(meshes: Sequence["TriangleMesh"], name: str = "") -> "TriangleMesh":
        """Merge meshes into one, offsetting triangle indices."""
        if not meshes:
            return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), name)
        offsets = np.cumsum([0] + [len(m.vertices) for m in meshes[:-1]])
        vertices = np.concatenate([m.vertices for m in meshes], axis=0)
        triangles = np.concatenate([m.triangles + off for m, off in zip(meshes, offsets)], axis=0)
        return TriangleMesh(vertices, triangles, name)


def empty_mesh(name: str = "") -> TriangleMesh:
    return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), name)


def box_mesh(lo: Iterable[float], hi: Iterable[float], name: str = "box") -> TriangleMesh:
    """Closed axis-aligned box with outward-facing triangles."""
    lo = np.asarray(list(lo), dtype=np.float64)
    hi = np.asarray(list(hi), dtype=np.float64)
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    vertices = np.array([
        [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
        [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
    ])
    triangles = np.array([
        [0, 2, 1], [0, 3, 2],  # bottom
        [4, 5, 6], [4, 6, 7],  # top
        [0, 1, 5], [0, 5, 4],  # y0
        [2, 3, 7], [2, 7, 6],  # y1
        [1, 2, 6], [1, 6, 5],  # x1
        [3, 0, 4], [3, 4, 7],  # x0
    ])
    return TriangleMesh(vertices, triangles, name)


def quad_mesh(corners: Sequence[Sequence[float]], name: str = "quad") -> TriangleMesh:
    """Two-triangle planar quad from four corners in winding order."""
    return TriangleMesh(np.asarray(corners, dtype=np.float64), np.array([[0, 1, 2], [0, 2, 3]]), name)


@dataclass(frozen=True, eq=False)
class Aabb:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64).reshape(3)
        hi = np.asarray(self.max, dtype=np.float64).reshape(3)
        if np.any(lo > hi):
            raise DataError(f"box min {lo.tolist()} exceeds max {hi.tolist()}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min + self.max)

    def contains_points(self, points: np.ndarray, tol: float = 0.0) -> bool:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return bool(np.all(points >= self.min - tol) and np.all(points <= self.max + tol))

    def contains_box(self, other: "Aabb", tol: float = 0.0) -> bool:
        return bool(np.all(other.min >= self.min - tol) and np.all(other.max <= self.max + tol))

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.min, other.min), np.maximum(self.max, other.max))


def _xyzw(wxyz: np.ndarray) -> np.ndarray:
    return np.array([wxyz[1], wxyz[2], wxyz[3], wxyz[0]])


def _wxyz(xyzw: np.ndarray) -> np.ndarray:
    return np.array([xyzw[3], xyzw[0], xyzw[1], xyzw[2]])


@dataclass(frozen=True, eq=False)
class Transform:
    """Uniform scale, then rotation (unit quaternion, w-x-y-z), then translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    scale: float = 1.0

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(q) - 1.0) > QUATERNION_TOLERANCE:
            raise BadTransform(f"rotation quaternion norm {np.linalg.norm(q)!r} is not 1")
        if not self.scale > 0:
            raise BadTransform(f"scale must be positive, got {self.scale!r}")
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "scale", float(self.scale))

    @staticmethod
    def identity() -> "Transform":
        return Transform()

    @staticmethod
    def from_rotation(rotation: Rotation, translation=(0.0, 0.0, 0.0), scale: float = 1.0) -> "Transform":
        q = _wxyz(rotation.as_quat())
        q = q / np.linalg.norm(q)
        return Transform(q, np.asarray(translation, dtype=np.float64), scale)

    @staticmethod
    def from_yaw(yaw: float, translation=(0.0, 0.0, 0.0), scale: float = 1.0) -> "Transform":
        return Transform.from_rotation(Rotation.from_euler("z", yaw), translation, scale)

    def as_rotation(self) -> Rotation:
        return Rotation.from_quat(_xyzw(self.rotation))

    def matrix(self) -> np.ndarray:
        """Homogeneous 4x4 matrix."""
        m = np.eye(4)
        m[:3, :3] = self.as_rotation().as_matrix() * self.scale
        m[:3, 3] = self.translation
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        rot = self.as_rotation().as_matrix()
        return (points * self.scale) @ rot.T + self.translation

    def compose(self, inner: "Transform") -> "Transform":
        """``self ∘ inner``: apply ``inner`` first."""
        rot = self.as_rotation() * inner.as_rotation()
        translation = self.apply(inner.translation)[0]
        return Transform.from_rotation(rot, translation, self.scale * inner.scale)

    def inverse(self) -> "Transform":
        inv_rot = self.as_rotation().inv()
        inv_scale = 1.0 / self.scale
        translation = -inv_rot.apply(self.translation) * inv_scale
        return Transform.from_rotation(inv_rot, translation, inv_scale)
