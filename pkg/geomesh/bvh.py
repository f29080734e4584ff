"""Bounding volume hierarchy over triangle meshes, and ray casting.

The tree is stored as flat arrays (structure of arrays) so traversal can be
vectorised over many rays at once: the renderer casts one ray per pixel and
walks the tree breadth-first with all (ray, node) pairs in flight.

Hit selection is exact and order independent: the nearest ``t`` wins and
ties go to the lowest source triangle index, so the result is identical to a
brute-force loop over all triangles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from geomesh.mesh import EmptyMesh, TriangleMesh
from utils.errors import UsageError

logger = logging.getLogger(__name__)

# The one place the ray/triangle determinant epsilon is defined.
DETERMINANT_EPSILON = 1e-9
LEAF_SIZE = 4


class BadRay(UsageError):
    code = "BAD_RAY"


@dataclass(frozen=True, eq=False)
class RayHit:
    t: float
    triangle: int
    barycentric: tuple[float, float, float]


@dataclass(frozen=True, eq=False)
class Bvh:
    """Flat BVH. A node is a leaf when ``count[n] > 0``; its triangles are
    ``order[start[n]:start[n] + count[n]]`` (source triangle indices)."""

    mesh: TriangleMesh
    node_min: np.ndarray
    node_max: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray
    corners: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.node_min)

    def is_leaf(self, node: int) -> bool:
        return bool(self.count[node] > 0)

    def leaf_triangles(self, node: int) -> np.ndarray:
        return self.order[self.start[node]:self.start[node] + self.count[node]]

    def traversal_pad(self) -> float:
        scale = float(np.abs(self.corners).max()) if self.corners.size else 1.0
        return 1e-7 * max(1.0, scale)


def build_bvh(mesh: TriangleMesh, leaf_size: int = LEAF_SIZE) -> Bvh:
    """Median split on the longest axis of each node's box, ``leaf_size`` triangles per leaf at most."""
    if mesh.is_empty:
        raise EmptyMesh(f"cannot build a BVH over empty mesh '{mesh.name}'")
    corners = mesh.corners()
    tri_min = corners.min(axis=1)
    tri_max = corners.max(axis=1)
    centroids = corners.mean(axis=1)

    node_min: list[np.ndarray] = []
    node_max: list[np.ndarray] = []
    left: list[int] = []
    right: list[int] = []
    start: list[int] = []
    count: list[int] = []
    order: list[np.ndarray] = []
    placed = 0

    def new_node() -> int:
        node_min.append(np.zeros(3))
        node_max.append(np.zeros(3))
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        return len(node_min) - 1

    stack = [(new_node(), np.arange(mesh.triangle_count))]
    while stack:
        node, idx = stack.pop()
        lo = tri_min[idx].min(axis=0)
        hi = tri_max[idx].max(axis=0)
        node_min[node] = lo
        node_max[node] = hi
        if len(idx) <= leaf_size:
            start[node] = placed
            count[node] = len(idx)
            order.append(idx)
            placed += len(idx)
            continue
        axis = int(np.argmax(hi - lo))
        mid = len(idx) // 2
        part = np.argpartition(centroids[idx, axis], mid)
        lhs, rhs = idx[part[:mid]], idx[part[mid:]]
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], rhs))
        stack.append((left[node], lhs))

    bvh = Bvh(
        mesh=mesh,
        node_min=np.asarray(node_min),
        node_max=np.asarray(node_max),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        start=np.asarray(start, dtype=np.int64),
        count=np.asarray(count, dtype=np.int64),
        order=np.concatenate(order).astype(np.int64),
        corners=corners,
    )
    logger.debug(f"Built BVH for '{mesh.name}': {mesh.triangle_count} triangles, {bvh.node_count} nodes")
    return bvh


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1] + a[:, 2] * b[:, 2]


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack([
        a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1],
        a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2],
        a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0],
    ], axis=1)


def intersect_triangles(origins, directions, v0, v1, v2, t_max):
    """Element-wise Möller–Trumbore test with closed edges.

    Returns ``(hit, t, u, v)``; a hit needs ``|det| > DETERMINANT_EPSILON``,
    ``u, v >= 0``, ``u + v <= 1`` and ``0 <= t <= t_max``.
    """
    e1 = v1 - v0
    e2 = v2 - v0
    p = _cross(directions, e2)
    det = _dot(e1, p)
    ok = np.abs(det) > DETERMINANT_EPSILON
    inv = np.divide(1.0, det, out=np.zeros_like(det), where=ok)
    s = origins - v0
    u = _dot(s, p) * inv
    q = _cross(s, e1)
    v = _dot(directions, q) * inv
    t = _dot(e2, q) * inv
    hit = ok & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t >= 0.0) & (t <= t_max)
    return hit, t, u, v


def _slab(origins, directions, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / directions
        ta = (lo - origins) * inv
        tb = (hi - origins) * inv
    t_lo = np.minimum(ta, tb)
    t_hi = np.maximum(ta, tb)
    parallel = directions == 0.0
    inside = (origins >= lo) & (origins <= hi)
    t_lo = np.where(parallel, np.where(inside, -np.inf, np.inf), t_lo)
    t_hi = np.where(parallel, np.where(inside, np.inf, -np.inf), t_hi)
    return t_lo.max(axis=1), t_hi.min(axis=1)


@dataclass(frozen=True, eq=False)
class BatchHits:
    """Per-ray results; ``triangle == -1`` and ``t == inf`` mark misses."""

    t: np.ndarray
    triangle: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def hit(self) -> np.ndarray:
        return self.triangle >= 0

    def barycentric(self) -> np.ndarray:
        return np.stack([1.0 - self.u - self.v, self.u, self.v], axis=1)


def _merge_candidates(best: dict, rays, t, tri, u, v) -> None:
    if rays.size == 0:
        return
    sort = np.lexsort((tri, t, rays))
    rays, t, tri, u, v = rays[sort], t[sort], tri[sort], u[sort], v[sort]
    _, first = np.unique(rays, return_index=True)
    rays, t, tri, u, v = rays[first], t[first], tri[first], u[first], v[first]
    cur_t = best["t"][rays]
    better = (t < cur_t) | ((t == cur_t) & (tri < best["triangle"][rays]))
    rays = rays[better]
    best["t"][rays] = t[better]
    best["triangle"][rays] = tri[better]
    best["u"][rays] = u[better]
    best["v"][rays] = v[better]


def ray_cast_batch(bvh: Bvh, origins: np.ndarray, directions: np.ndarray, t_max) -> BatchHits:
    """Nearest hit for every ray, walking the tree with all rays at once."""
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    n_rays = len(origins)
    t_limit = np.broadcast_to(np.asarray(t_max, dtype=np.float64), (n_rays,))
    best = {
        "t": np.full(n_rays, np.inf),
        "triangle": np.full(n_rays, -1, dtype=np.int64),
        "u": np.zeros(n_rays),
        "v": np.zeros(n_rays),
    }
    pad = bvh.traversal_pad()
    rays = np.arange(n_rays)
    nodes = np.zeros(n_rays, dtype=np.int64)
    while rays.size:
        t_near, t_far = _slab(origins[rays], directions[rays], bvh.node_min[nodes] - pad, bvh.node_max[nodes] + pad)
        keep = (t_near <= t_far) & (t_far >= 0.0) & (t_near <= np.minimum(best["t"][rays], t_limit[rays]))
        rays, nodes = rays[keep], nodes[keep]
        leaf = bvh.count[nodes] > 0

        leaf_rays, leaf_nodes = rays[leaf], nodes[leaf]
        counts = bvh.count[leaf_nodes]
        cand_rays = np.repeat(leaf_rays, counts)
        offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        cand_tris = bvh.order[np.repeat(bvh.start[leaf_nodes], counts) + offsets]
        tri = bvh.corners[cand_tris]
        hit, t, u, v = intersect_triangles(
            origins[cand_rays], directions[cand_rays], tri[:, 0], tri[:, 1], tri[:, 2], t_limit[cand_rays]
        )
        _merge_candidates(best, cand_rays[hit], t[hit], cand_tris[hit], u[hit], v[hit])

        inner_rays, inner_nodes = rays[~leaf], nodes[~leaf]
        rays = np.concatenate([inner_rays, inner_rays])
        nodes = np.concatenate([bvh.left[inner_nodes], bvh.right[inner_nodes]])
    return BatchHits(best["t"], best["triangle"], best["u"], best["v"])


def _check_ray(direction: np.ndarray, t_max: float) -> None:
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise BadRay(f"ray direction must be unit length, got norm {np.linalg.norm(direction)!r}")
    if not t_max > 0:
        raise BadRay(f"t_max must be positive, got {t_max!r}")


def _as_hit(hits: BatchHits) -> Optional[RayHit]:
    if hits.triangle[0] < 0:
        return None
    u, v = float(hits.u[0]), float(hits.v[0])
    return RayHit(float(hits.t[0]), int(hits.triangle[0]), (1.0 - u - v, u, v))


def ray_cast(bvh: Bvh, origin, direction, t_max: float) -> Optional[RayHit]:
    """Nearest intersection with ``t`` in ``[0, t_max]``, or None."""
    origin = np.asarray(origin, dtype=np.float64).reshape(3)
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    _check_ray(direction, t_max)
    return _as_hit(ray_cast_batch(bvh, origin[None], direction[None], t_max))


def ray_cast_brute(mesh: TriangleMesh, origin, direction, t_max: float) -> Optional[RayHit]:
    """Reference: test every triangle, keep the nearest (lowest index on ties)."""
    origin = np.asarray(origin, dtype=np.float64).reshape(3)
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    _check_ray(direction, t_max)
    if mesh.is_empty:
        return None
    tri = mesh.corners()
    n = len(tri)
    hit, t, u, v = intersect_triangles(
        np.broadcast_to(origin, (n, 3)), np.broadcast_to(direction, (n, 3)),
        tri[:, 0], tri[:, 1], tri[:, 2], np.full(n, float(t_max)),
    )
    if not hit.any():
        return None
    candidates = np.flatnonzero(hit)
    best = candidates[np.lexsort((candidates, t[candidates]))[0]]
    return RayHit(float(t[best]), int(best), (1.0 - float(u[best]) - float(v[best]), float(u[best]), float(v[best])))
