"""Voxel occupancy grids built from environment triangles."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from geomesh.mesh import TriangleMesh
from scenegen.environment import Environment
from utils.errors import DataError, UsageError

logger = logging.getLogger(__name__)

UNKNOWN = 0
FREE = 1
OCCUPIED = 2

DEFAULT_MAX_CELLS = 4_000_000
# Triangle/cell pairs tested per batch.
OVERLAP_BATCH = 200_000
OVERLAP_EPSILON = 1e-9


class GridTooLarge(DataError):
    code = "GRID_TOO_LARGE"


@dataclass(eq=False)
class OccupancyGrid:
    """Known map plus the voxelized truth it is revealed from.

    ``state`` holds UNKNOWN/FREE/OCCUPIED per cell and is what the planner
    sees; ``truth`` marks cells any obstacle triangle touches.
    """

    origin: np.ndarray
    cell: float
    dims: tuple[int, int, int]
    state: np.ndarray
    truth: np.ndarray

    @property
    def truth_free_count(self) -> int:
        return int((~self.truth).sum())

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.origin.copy(), self.cell, self.dims, self.state.copy(), self.truth)

    def index_of(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return np.floor((points - self.origin) / self.cell).astype(np.int64)

    def center_of(self, index) -> np.ndarray:
        return self.origin + (np.asarray(index, dtype=np.float64) + 0.5) * self.cell

    def in_grid(self, index: np.ndarray) -> np.ndarray:
        index = np.asarray(index)
        return np.all((index >= 0) & (index < np.asarray(self.dims)), axis=-1)

    def truth_free_at(self, points: np.ndarray) -> np.ndarray:
        """True where a point lies inside the grid in a cell no obstacle touches."""
        index = self.index_of(points).reshape(-1, 3)
        inside = self.in_grid(index)
        result = np.zeros(len(index), dtype=bool)
        i = index[inside]
        result[inside] = ~self.truth[i[:, 0], i[:, 1], i[:, 2]]
        return result

    def known_count(self) -> int:
        return int((self.state != UNKNOWN).sum())

    def observed_free_count(self) -> int:
        return int(((self.state == FREE) & ~self.truth).sum())


def _box_overlaps(tri: np.ndarray, centers: np.ndarray, half: float) -> np.ndarray:
    """Closed triangle/cube overlap by separating axes (3 box faces, triangle normal, 9 edge crosses)."""
    v = tri - centers[:, None, :]
    eps = OVERLAP_EPSILON + 1e-9 * half
    separated = np.any(v.min(axis=1) > half + eps, axis=1) | np.any(v.max(axis=1) < -half - eps, axis=1)
    edges = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 1], v[:, 0] - v[:, 2]], axis=1)
    normal = np.cross(edges[:, 0], edges[:, 1])
    r = half * np.abs(normal).sum(axis=1)
    d = np.einsum("ij,ij->i", normal, v[:, 0])
    separated |= np.abs(d) > r + eps * np.linalg.norm(normal, axis=1)
    unit = np.eye(3)
    for i in range(3):
        for j in range(3):
            axis = np.cross(unit[i][None, :], edges[:, j])
            p = np.einsum("ijk,ik->ij", v, axis)
            r = half * np.abs(axis).sum(axis=1)
            slack = eps * np.linalg.norm(axis, axis=1)
            separated |= (p.min(axis=1) > r + slack) | (p.max(axis=1) < -r - slack)
    return ~separated


def _mark_mesh(mesh: TriangleMesh, origin: np.ndarray, cell: float, dims: np.ndarray, occupied: np.ndarray) -> None:
    corners = mesh.corners()
    lo = np.clip(np.floor((corners.min(axis=1) - origin) / cell - 1e-9).astype(np.int64), 0, dims - 1)
    hi = np.clip(np.floor((corners.max(axis=1) - origin) / cell + 1e-9).astype(np.int64), 0, dims - 1)
    span = hi - lo + 1
    per_tri = span.prod(axis=1)
    order = np.arange(len(corners))
    start = 0
    while start < len(order):
        # Grow the batch until it holds enough triangle/cell pairs.
        stop = start + 1
        budget = per_tri[start]
        while stop < len(order) and budget + per_tri[stop] <= OVERLAP_BATCH:
            budget += per_tri[stop]
            stop += 1
        tris = order[start:stop]
        counts = per_tri[tris]
        owner = np.repeat(tris, counts)
        local = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        sy, sz = span[owner, 1], span[owner, 2]
        idx = lo[owner] + np.stack([local // (sy * sz), (local // sz) % sy, local % sz], axis=1)
        centers = origin + (idx + 0.5) * cell
        hit = _box_overlaps(corners[owner], centers, cell / 2)
        occupied[idx[hit, 0], idx[hit, 1], idx[hit, 2]] = True
        start = stop


def voxelize(
    env: Environment,
    cell: float,
    max_cells: int = DEFAULT_MAX_CELLS,
    extra_meshes: Sequence[TriangleMesh] = (),
) -> OccupancyGrid:
    """Grid over ``env.bounds``; a cell is occupied iff some triangle touches it.

    ``extra_meshes`` (for example swept human meshes) are voxelized as
    obstacles too. Every non-occupied cell starts UNKNOWN.
    """
    if not cell > 0:
        raise UsageError(f"cell size must be positive, got {cell!r}")
    origin = env.bounds.min.copy()
    extent = env.bounds.extent
    dims_float = np.maximum(np.ceil(extent / cell), 1.0)
    if float(np.prod(dims_float)) > max_cells:
        raise GridTooLarge(
            f"grid of {dims_float.astype(np.int64).tolist()} cells at {cell} m exceeds the budget of {max_cells} cells"
        )
    dims = dims_float.astype(np.int64)
    occupied = np.zeros(tuple(dims), dtype=bool)
    meshes = [m.mesh for m in env.meshes] + list(extra_meshes)
    for mesh in meshes:
        if not mesh.is_empty:
            _mark_mesh(mesh, origin, cell, dims, occupied)
    state = np.where(occupied, OCCUPIED, UNKNOWN).astype(np.uint8)
    grid = OccupancyGrid(origin, float(cell), tuple(int(d) for d in dims), state, occupied)
    logger.debug(f"Voxelized '{env.manifest_id}' into {grid.dims} cells, {int(occupied.sum())} occupied")
    return grid
