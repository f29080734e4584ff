"""Mesh-mesh collision by BVH-vs-BVH descent and a closed triangle SAT.

Touching counts as colliding: two triangles are separated only when some
axis shows a gap larger than ``CONTACT_EPSILON`` meters.
"""

from __future__ import annotations

import logging

import numpy as np

from geomesh.bvh import Bvh, build_bvh
from geomesh.mesh import EmptyMesh, Transform, TriangleMesh

logger = logging.getLogger(__name__)

CONTACT_EPSILON = 1e-9
# Axes shorter than this, relative to the product of their factor lengths, are skipped.
AXIS_EPSILON = 1e-12
# Triangle pairs per SAT batch.
PAIR_BATCH = 65536


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...k,...k->...", a, b)


def _candidate_axes(tri_a: np.ndarray, tri_b: np.ndarray):
    """Yield ``(axis, reference_length)`` for all 17 separating-axis candidates."""
    edges_a = np.stack([tri_a[:, 1] - tri_a[:, 0], tri_a[:, 2] - tri_a[:, 1], tri_a[:, 0] - tri_a[:, 2]], axis=1)
    edges_b = np.stack([tri_b[:, 1] - tri_b[:, 0], tri_b[:, 2] - tri_b[:, 1], tri_b[:, 0] - tri_b[:, 2]], axis=1)
    len_a = np.linalg.norm(edges_a, axis=2)
    len_b = np.linalg.norm(edges_b, axis=2)
    normal_a = np.cross(edges_a[:, 0], -edges_a[:, 2])
    normal_b = np.cross(edges_b[:, 0], -edges_b[:, 2])
    yield normal_a, len_a[:, 0] * len_a[:, 2]
    yield normal_b, len_b[:, 0] * len_b[:, 2]
    for i in range(3):
        for j in range(3):
            yield np.cross(edges_a[:, i], edges_b[:, j]), len_a[:, i] * len_b[:, j]
    norm_na = np.linalg.norm(normal_a, axis=1)
    norm_nb = np.linalg.norm(normal_b, axis=1)
    for i in range(3):
        yield np.cross(normal_a, edges_a[:, i]), norm_na * len_a[:, i]
        yield np.cross(normal_b, edges_b[:, i]), norm_nb * len_b[:, i]


def triangles_intersect(tri_a: np.ndarray, tri_b: np.ndarray) -> np.ndarray:
    """Closed triangle-triangle overlap test, vectorised over pairs.

    Args:
        tri_a: ``(K, 3, 3)`` or ``(3, 3)`` triangle corners.
        tri_b: same shape as ``tri_a``.

    Returns:
        Boolean array of shape ``(K,)`` (or a bool for single triangles).
    """
    tri_a = np.asarray(tri_a, dtype=np.float64)
    tri_b = np.asarray(tri_b, dtype=np.float64)
    single = tri_a.ndim == 2
    tri_a = tri_a.reshape(-1, 3, 3)
    tri_b = tri_b.reshape(-1, 3, 3)
    separated = np.zeros(len(tri_a), dtype=bool)
    for axis, reference in _candidate_axes(tri_a, tri_b):
        length = np.linalg.norm(axis, axis=1)
        usable = length > AXIS_EPSILON * reference
        proj_a = _dot(tri_a, axis[:, None, :])
        proj_b = _dot(tri_b, axis[:, None, :])
        gap = np.maximum(proj_b.min(axis=1) - proj_a.max(axis=1), proj_a.min(axis=1) - proj_b.max(axis=1))
        separated |= usable & (gap > CONTACT_EPSILON * length)
    result = ~separated
    return bool(result[0]) if single else result


def _boxes_overlap(min_a, max_a, min_b, max_b, tol: float) -> np.ndarray:
    return np.all(min_a <= max_b + tol, axis=1) & np.all(min_b <= max_a + tol, axis=1)


def _leaf_pairs_to_triangles(bvh_a: Bvh, bvh_b: Bvh, nodes_a: np.ndarray, nodes_b: np.ndarray):
    count_a = bvh_a.count[nodes_a]
    count_b = bvh_b.count[nodes_b]
    per_pair = count_a * count_b
    total = int(per_pair.sum())
    pair_of = np.repeat(np.arange(len(nodes_a)), per_pair)
    local = np.arange(total) - np.repeat(np.cumsum(per_pair) - per_pair, per_pair)
    ia = local // count_b[pair_of]
    ib = local % count_b[pair_of]
    tris_a = bvh_a.order[bvh_a.start[nodes_a][pair_of] + ia]
    tris_b = bvh_b.order[bvh_b.start[nodes_b][pair_of] + ib]
    return tris_a, tris_b


def collision_pairs(bvh_a: Bvh, bvh_b: Bvh, stop_at_first: bool = True) -> np.ndarray:
    """Source-index triangle pairs ``(i, j)`` that intersect.

    With ``stop_at_first`` the search ends after the batch that found a hit.
    """
    tol = max(bvh_a.traversal_pad(), bvh_b.traversal_pad())
    corners_a, corners_b = bvh_a.corners, bvh_b.corners
    tri_min_a, tri_max_a = corners_a.min(axis=1), corners_a.max(axis=1)
    tri_min_b, tri_max_b = corners_b.min(axis=1), corners_b.max(axis=1)
    found: list[np.ndarray] = []
    nodes_a = np.zeros(1, dtype=np.int64)
    nodes_b = np.zeros(1, dtype=np.int64)
    while nodes_a.size:
        keep = _boxes_overlap(bvh_a.node_min[nodes_a], bvh_a.node_max[nodes_a],
                              bvh_b.node_min[nodes_b], bvh_b.node_max[nodes_b], tol)
        nodes_a, nodes_b = nodes_a[keep], nodes_b[keep]
        leaf_a = bvh_a.count[nodes_a] > 0
        leaf_b = bvh_b.count[nodes_b] > 0

        both = leaf_a & leaf_b
        if both.any():
            tris_a, tris_b = _leaf_pairs_to_triangles(bvh_a, bvh_b, nodes_a[both], nodes_b[both])
            near = _boxes_overlap(tri_min_a[tris_a], tri_max_a[tris_a], tri_min_b[tris_b], tri_max_b[tris_b], tol)
            tris_a, tris_b = tris_a[near], tris_b[near]
            for lo in range(0, len(tris_a), PAIR_BATCH):
                sl = slice(lo, lo + PAIR_BATCH)
                hit = triangles_intersect(corners_a[tris_a[sl]], corners_b[tris_b[sl]])
                if hit.any():
                    found.append(np.stack([tris_a[sl][hit], tris_b[sl][hit]], axis=1))
                    if stop_at_first:
                        return found[0]

        # Descend into b when a is a leaf, or when b's box is the larger one.
        extent_a = (bvh_a.node_max[nodes_a] - bvh_a.node_min[nodes_a]).sum(axis=1)
        extent_b = (bvh_b.node_max[nodes_b] - bvh_b.node_min[nodes_b]).sum(axis=1)
        split_b = ~both & (leaf_a | (~leaf_b & (extent_b > extent_a)))
        split_a = ~both & ~split_b
        nodes_a = np.concatenate([
            bvh_a.left[nodes_a[split_a]], bvh_a.right[nodes_a[split_a]], nodes_a[split_b], nodes_a[split_b],
        ])
        nodes_b = np.concatenate([
            nodes_b[split_a], nodes_b[split_a], bvh_b.left[nodes_b[split_b]], bvh_b.right[nodes_b[split_b]],
        ])
    if not found:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = np.concatenate(found, axis=0)
    return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]


def bvh_collide(bvh_a: Bvh, bvh_b: Bvh) -> bool:
    """True iff any triangle of ``bvh_a``'s mesh touches one of ``bvh_b``'s (both already in world space)."""
    return len(collision_pairs(bvh_a, bvh_b, stop_at_first=True)) > 0


def meshes_collide(a: TriangleMesh, ta: Transform, b: TriangleMesh, tb: Transform) -> bool:
    if a.is_empty or b.is_empty:
        raise EmptyMesh(f"collision test needs non-empty meshes ('{a.name}', '{b.name}')")
    return bvh_collide(build_bvh(a.transformed(ta)), build_bvh(b.transformed(tb)))
