"""Greedy nearest-frontier exploration producing a fixed-rate camera trajectory.

Each frame the camera senses (rays within its field of view and range, plus
the cells right around it), then advances at most ``v_max / fps`` along a
shortcut-smoothed A* path towards the nearest frontier cluster. When no
reachable frontier is left it hovers and turns slowly.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from explore.grid import FREE, OCCUPIED, UNKNOWN, OccupancyGrid
from explore.trajectory import Trajectory, yaw_pitch_roll_to_wxyz
from utils.errors import DataError, UsageError
from utils.seeding import stream

logger = logging.getLogger(__name__)

NEIGHBORS_6 = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]])
NEIGHBORS_26 = np.array([[i, j, k] for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)])


class NoFreeSpace(DataError):
    code = "NO_FREE_SPACE"


@dataclass(frozen=True)
class ExplorationConfig:
    fps: float = 30.0
    duration: float = 60.0
    v_max: float = 1.0
    sensor_range: float = 5.0
    fov_horizontal: float = math.radians(90.0)
    fov_vertical: float = math.radians(60.0)
    rays_horizontal: int = 32
    rays_vertical: int = 16
    pitch: float = 0.0
    max_yaw_rate: float = math.radians(90.0)
    hover_yaw_rate: float = math.radians(20.0)
    altitude_range: Optional[tuple[float, float]] = None

    @property
    def frame_count(self) -> int:
        return int(round(self.duration * self.fps))

    def validate(self) -> None:
        if not (self.fps > 0 and self.duration > 0 and self.v_max >= 0 and self.sensor_range > 0):
            raise UsageError("exploration needs fps > 0, duration > 0, v_max >= 0 and sensor_range > 0")


@dataclass(frozen=True, eq=False)
class StartPose:
    position: np.ndarray
    yaw: float


def _band_mask(grid: OccupancyGrid, altitude_range: Optional[tuple[float, float]]) -> np.ndarray:
    mask = np.ones(grid.dims, dtype=bool)
    if altitude_range is not None:
        z = grid.origin[2] + (np.arange(grid.dims[2]) + 0.5) * grid.cell
        mask &= ((z >= altitude_range[0]) & (z <= altitude_range[1]))[None, None, :]
    return mask


def random_free_start(
    grid: OccupancyGrid, seed: int, altitude_range: Optional[tuple[float, float]] = None,
) -> StartPose:
    """Uniformly chosen obstacle-free cell centre with a uniform random yaw."""
    candidates = np.flatnonzero(~grid.truth & _band_mask(grid, altitude_range))
    if candidates.size == 0:
        raise NoFreeSpace("no obstacle-free cell to start the camera in")
    rng = stream(seed, "start")
    cell = np.unravel_index(candidates[rng.integers(candidates.size)], grid.dims)
    yaw = float(rng.uniform(-math.pi, math.pi))
    return StartPose(grid.center_of(cell), yaw)


def astar(passable: np.ndarray, start: tuple[int, int, int], goal: tuple[int, int, int]) -> Optional[list[tuple]]:
    """6-connected A* with a Manhattan heuristic; ties resolve by insertion order."""
    dims = passable.shape

    def heuristic(a):
        return abs(a[0] - goal[0]) + abs(a[1] - goal[1]) + abs(a[2] - goal[2])

    open_set = [(heuristic(start), 0, start)]
    came_from: dict[tuple, tuple] = {}
    g_score = {start: 0}
    counter = 0
    while open_set:
        _, _, current = heapq.heappop(open_set)
        if current == goal:
            path = [current]
            while current in came_from:
                current = came_from[current]
                path.append(current)
            return path[::-1]
        for di, dj, dk in NEIGHBORS_6:
            nb = (current[0] + int(di), current[1] + int(dj), current[2] + int(dk))
            if not (0 <= nb[0] < dims[0] and 0 <= nb[1] < dims[1] and 0 <= nb[2] < dims[2]):
                continue
            if not passable[nb]:
                continue
            tentative = g_score[current] + 1
            if tentative < g_score.get(nb, math.inf):
                came_from[nb] = current
                g_score[nb] = tentative
                counter += 1
                heapq.heappush(open_set, (tentative + heuristic(nb), counter, nb))
    return None


def grid_distances(passable: np.ndarray, source: tuple[int, int, int]) -> np.ndarray:
    """Unit-step 6-connected graph distance from ``source`` to every cell (inf if unreachable)."""
    flat = passable.ravel()
    index = np.arange(flat.size).reshape(passable.shape)
    rows, cols = [], []
    for axis in range(3):
        a = [slice(None)] * 3
        b = [slice(None)] * 3
        a[axis] = slice(0, -1)
        b[axis] = slice(1, None)
        both = passable[tuple(a)] & passable[tuple(b)]
        rows.append(index[tuple(a)][both])
        cols.append(index[tuple(b)][both])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(flat.size, flat.size)).tocsr()
    distances = shortest_path(graph, directed=False, unweighted=True, indices=int(np.ravel_multi_index(source, passable.shape)))
    return distances.reshape(passable.shape)


@dataclass(eq=False)
class FrontierExplorer:
    grid: OccupancyGrid
    start: StartPose
    config: ExplorationConfig = field(default_factory=ExplorationConfig)

    def __post_init__(self):
        self.config.validate()
        self.grid = self.grid.copy()
        self.position = np.asarray(self.start.position, dtype=np.float64).copy()
        self.yaw = float(self.start.yaw)
        self.band = _band_mask(self.grid, self.config.altitude_range)
        if not self.grid.truth_free_at(self.position)[0]:
            raise NoFreeSpace(f"start position {self.position.tolist()} is not in a free cell")
        self.history: list[int] = []
        self.path: list[np.ndarray] = []
        self.target: Optional[tuple[int, int, int]] = None
        self.rejected: set[tuple[int, int, int]] = set()
        h = np.linspace(-0.5, 0.5, self.config.rays_horizontal) * self.config.fov_horizontal
        v = np.linspace(-0.5, 0.5, self.config.rays_vertical) * self.config.fov_vertical
        self._ray_yaw, self._ray_pitch = (a.ravel() for a in np.meshgrid(h, v, indexing="ij"))

    def current_cell(self) -> tuple[int, int, int]:
        return tuple(int(i) for i in self.grid.index_of(self.position))

    def passable(self) -> np.ndarray:
        return (self.grid.state == FREE) & self.band

    # Sensing

    def _reveal_neighborhood(self) -> None:
        cells = np.asarray(self.current_cell()) + NEIGHBORS_26
        cells = cells[self.grid.in_grid(cells)]
        i, j, k = cells.T
        self.grid.state[i, j, k] = np.where(self.grid.truth[i, j, k], OCCUPIED, FREE)

    def sense(self) -> None:
        self._reveal_neighborhood()
        yaw = self.yaw + self._ray_yaw
        pitch = self.config.pitch + self._ray_pitch
        directions = np.stack([np.cos(pitch) * np.cos(yaw), np.cos(pitch) * np.sin(yaw), -np.sin(pitch)], axis=1)
        step = self.grid.cell / 2
        ts = np.arange(step, self.config.sensor_range + step / 2, step)
        points = self.position + directions[:, None, :] * ts[None, :, None]
        idx = self.grid.index_of(points)
        inside = self.grid.in_grid(idx)
        safe = np.where(inside[..., None], idx, 0)
        blocked = ~inside | self.grid.truth[safe[..., 0], safe[..., 1], safe[..., 2]]
        first = np.where(blocked.any(axis=1), blocked.argmax(axis=1), len(ts))
        seen_free = np.arange(len(ts))[None, :] < first[:, None]
        free_idx = idx[seen_free]
        self.grid.state[free_idx[:, 0], free_idx[:, 1], free_idx[:, 2]] = FREE
        hit_rays = np.flatnonzero(first < len(ts))
        hit_idx = idx[hit_rays, first[hit_rays]]
        hit_idx = hit_idx[self.grid.in_grid(hit_idx)]
        self.grid.state[hit_idx[:, 0], hit_idx[:, 1], hit_idx[:, 2]] = OCCUPIED

    # Frontiers

    def frontier_mask(self) -> np.ndarray:
        unknown = self.grid.state == UNKNOWN
        near_unknown = np.zeros_like(unknown)
        padded = np.pad(unknown, 1)
        for di, dj, dk in NEIGHBORS_6:
            near_unknown |= padded[1 + di:padded.shape[0] - 1 + di,
                                   1 + dj:padded.shape[1] - 1 + dj,
                                   1 + dk:padded.shape[2] - 1 + dk]
        mask = self.passable() & near_unknown
        for cell in self.rejected:
            mask[cell] = False
        return mask

    def _is_frontier(self, cell: tuple[int, int, int]) -> bool:
        if self.grid.state[cell] != FREE or cell in self.rejected:
            return False
        for di, dj, dk in NEIGHBORS_6:
            nb = np.array(cell) + (di, dj, dk)
            if self.grid.in_grid(nb) and self.grid.state[tuple(nb)] == UNKNOWN:
                return True
        return False

    def select_target(self) -> Optional[tuple[int, int, int]]:
        """Centroid cell of the frontier cluster nearest by grid distance."""
        frontier = self.frontier_mask()
        if not frontier.any():
            return None
        labels, count = ndimage.label(frontier, structure=np.ones((3, 3, 3), dtype=bool))
        distances = grid_distances(self.passable(), self.current_cell())
        coords = np.argwhere(frontier)
        order = np.argsort(labels[frontier], kind="stable")
        groups = np.split(coords[order], np.cumsum(np.bincount(labels[frontier], minlength=count + 1)[1:])[:-1])
        best, best_distance = None, math.inf
        for members in groups:
            centroid = members.mean(axis=0)
            cell = tuple(int(v) for v in members[np.argmin(((members - centroid) ** 2).sum(axis=1))])
            if distances[cell] < best_distance:
                best, best_distance = cell, distances[cell]
        return best

    # Motion

    def line_of_sight(self, a: np.ndarray, b: np.ndarray) -> bool:
        """Conservative check that the segment ``a``-``b`` stays inside passable cells."""
        length = float(np.linalg.norm(b - a))
        count = max(2, int(math.ceil(length / (self.grid.cell / 8))) + 1)
        samples = a + np.linspace(0.0, 1.0, count)[:, None] * (b - a)
        h = self.grid.cell / 12
        corners = np.array([[x, y, z] for x in (-h, h) for y in (-h, h) for z in (-h, h)])
        idx = self.grid.index_of(samples[:, None, :] + corners[None]).reshape(-1, 3)
        if not np.all(self.grid.in_grid(idx)):
            return False
        passable = self.passable()
        return bool(np.all(passable[idx[:, 0], idx[:, 1], idx[:, 2]]))

    def plan_path(self, goal: tuple[int, int, int]) -> Optional[list[np.ndarray]]:
        cells = astar(self.passable(), self.current_cell(), goal)
        if cells is None:
            return None
        points = [self.position] + [self.grid.center_of(c) for c in cells]
        smoothed = []
        i = 0
        while i < len(points) - 1:
            j = len(points) - 1
            while j > i + 1 and not self.line_of_sight(points[i], points[j]):
                j -= 1
            smoothed.append(points[j])
            i = j
        return smoothed

    def _replan(self) -> None:
        while True:
            self.target = self.select_target()
            if self.target is None:
                self.path = []
                return
            path = self.plan_path(self.target)
            if path is not None:
                self.path = path
                return
            logger.warning(f"Frontier target {self.target} is unreachable; skipping it")
            self.rejected.add(self.target)

    def _advance(self) -> np.ndarray:
        budget = self.config.v_max / self.config.fps
        start = self.position.copy()
        while budget > 0 and self.path:
            waypoint = self.path[0]
            offset = waypoint - self.position
            distance = float(np.linalg.norm(offset))
            if distance <= budget:
                self.position = waypoint.copy()
                budget -= distance
                self.path.pop(0)
            else:
                self.position = self.position + offset * (budget / distance)
                budget = 0.0
        return self.position - start

    def _turn(self, motion: np.ndarray) -> None:
        limit = self.config.max_yaw_rate / self.config.fps
        if math.hypot(motion[0], motion[1]) > 1e-9:
            desired = math.atan2(motion[1], motion[0])
            delta = (desired - self.yaw + math.pi) % (2 * math.pi) - math.pi
            self.yaw += float(np.clip(delta, -limit, limit))
        elif not self.path:
            self.yaw += min(self.config.hover_yaw_rate, self.config.max_yaw_rate) / self.config.fps
        self.yaw = (self.yaw + math.pi) % (2 * math.pi) - math.pi

    def step(self) -> None:
        if not self.path or self.target is None or not self._is_frontier(self.target):
            if self.target is not None and not self.path and self._is_frontier(self.target):
                logger.warning(f"Frontier target {self.target} stayed unobserved after arrival; skipping it")
                self.rejected.add(self.target)
            self._replan()
        motion = self._advance()
        self._turn(motion)

    def run(self) -> Trajectory:
        n = max(1, self.config.frame_count)
        positions = np.zeros((n, 3))
        yaws = np.zeros(n)
        for i in range(n):
            positions[i] = self.position
            yaws[i] = self.yaw
            self.sense()
            self.history.append(self.grid.known_count())
            if i < n - 1:
                self.step()
        orientations = yaw_pitch_roll_to_wxyz(yaws, np.full(n, self.config.pitch), np.zeros(n))
        observed = self.grid.observed_free_count()
        logger.info(
            f"Exploration finished: {n} poses, {observed}/{self.grid.truth_free_count} free cells observed"
        )
        return Trajectory(self.config.fps, positions, orientations)


def plan_exploration(grid: OccupancyGrid, start: StartPose, config: ExplorationConfig) -> Trajectory:
    return FrontierExplorer(grid, start, config).run()
