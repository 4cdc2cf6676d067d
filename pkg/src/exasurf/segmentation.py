"""Curvature-threshold mesh segmentation.

Vertices with k1 below a negative threshold trace the deep concave creases
where parts meet; they become boundary (label 0) and the remaining vertex
graph splits into connected components, labelled 1..7 by descending size.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .mesh import XQuadMesh

MAX_PARTITIONS = 7        # 3-bit label budget, 0 reserved for boundary


def segment_mesh(mesh: XQuadMesh, curvatures: np.ndarray,
                 k1_threshold: float = -0.5) -> np.ndarray:
    """Per-vertex partition labels: 0 boundary, 1..7 components by size."""
    if k1_threshold >= 0:
        raise ValueError("k1_threshold must be negative")
    V = mesh.n_vertices
    labels = np.zeros(V, dtype=np.uint8)
    if V == 0 or mesh.triangles is None or len(mesh.triangles) == 0:
        return labels
    boundary = curvatures[:, 0] < k1_threshold
    T = mesh.triangles.astype(np.int64)
    e = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    keep = ~boundary[e[:, 0]] & ~boundary[e[:, 1]]
    e = e[keep]
    adj = coo_matrix((np.ones(len(e), dtype=np.int8), (e[:, 0], e[:, 1])), shape=(V, V))
    n_comp, comp = connected_components(adj, directed=False)
    comp[boundary] = -1
    # isolated non-boundary vertices with no surviving edges stay unassigned
    used = np.bincount(e.ravel(), minlength=V) > 0
    comp[~used & ~boundary] = -1
    ids, sizes = np.unique(comp[comp >= 0], return_counts=True)
    if len(ids) == 0:
        return labels
    order = np.lexsort((ids, -sizes))
    rank_of = {int(ids[i]): r + 1 for r, i in enumerate(order)}
    if len(ids) > MAX_PARTITIONS:
        warnings.warn(f"{len(ids)} partitions exceed the 3-bit budget; "
                      f"merging the smallest into label {MAX_PARTITIONS}")
    for cid, r in rank_of.items():
        labels[comp == cid] = min(r, MAX_PARTITIONS)
    return labels


def partition_sizes(labels: np.ndarray) -> dict:
    ids, counts = np.unique(labels, return_counts=True)
    return {int(i): int(c) for i, c in zip(ids, counts)}


def triangle_partitions(mesh: XQuadMesh, labels: np.ndarray) -> np.ndarray:
    """Triangle label: the max vertex label (components never share an edge,
    so nonzero labels within a triangle agree)."""
    T = mesh.triangles
    return np.max(labels[T], axis=1).astype(np.uint8)
