"""Principal curvature estimation on x-quads and 127-class shape coding.

Each x-quad yields two normal-curvature samples from its pairwise opposite
corners via (n2 - n1).(p2 - p1)/|p2 - p1|^2; the larger is the face k1, the
smaller k2. Vertex curvature pairs are the weighted vector median of the
incident face pairs. The shape code combines 9 shape-angle bins with 14
half-octave curvedness bins plus one flat class: 9*14 + 1 = 127 categories.
"""

from __future__ import annotations

import numpy as np

from .mesh import XQuadMesh
from .smoothing import weighted_vector_median

C_MIN_DEFAULT = 2.0 ** -6
PAIR_EPS = 1e-9


def estimate_curvatures(mesh: XQuadMesh) -> np.ndarray:
    """Per-vertex (k1, k2), k1 >= k2, in reciprocal grid units."""
    V = mesh.n_vertices
    out = np.zeros((V, 2), dtype=np.float64)
    quads = np.flatnonzero((mesh.quad_slots >= 0).all(axis=1))
    if len(quads) == 0:
        return out
    q = mesh.quad_slots[quads]
    p = mesh.vertices.astype(np.float64)
    n = mesh.vertex_normals.astype(np.float64)

    def pair_curvature(a, b):
        dp = p[b] - p[a]
        dn = n[b] - n[a]
        L2 = np.einsum("ij,ij->i", dp, dp)
        ok = L2 > PAIR_EPS
        c = np.zeros(len(a))
        c[ok] = np.einsum("ij,ij->i", dn[ok], dp[ok]) / L2[ok]
        return c, ok

    c1, ok1 = pair_curvature(q[:, 0], q[:, 2])
    c2, ok2 = pair_curvature(q[:, 1], q[:, 3])
    valid = ok1 | ok2
    c1 = np.where(ok1, c1, c2)
    c2 = np.where(ok2, c2, c1)
    k1 = np.maximum(c1, c2)
    k2 = np.minimum(c1, c2)

    # vertex pair = weighted vector median of incident face pairs
    quads = quads[valid]
    k = np.stack([k1[valid], k2[valid], np.zeros(valid.sum())], axis=1)
    w = np.maximum(mesh.face_area[quads].astype(np.float64), 1e-12)
    vert_items = []
    vert_ids = []
    for s in range(4):
        vert_ids.append(mesh.quad_slots[quads, s])
        vert_items.append(np.arange(len(quads)))
    vid = np.concatenate(vert_ids)
    item = np.concatenate(vert_items)
    order = np.argsort(vid, kind="stable")
    vid, item = vid[order], item[order]
    counts = np.bincount(vid, minlength=V)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    med = weighted_vector_median(k, w, offsets, item)
    out[:, 0] = np.maximum(med[:, 0], med[:, 1])
    out[:, 1] = np.minimum(med[:, 0], med[:, 1])
    out[counts == 0] = 0.0
    return out


def classify_shape(k1, k2, c_min: float = C_MIN_DEFAULT):
    """7-bit shape code: 0 = flat, else 1 + shape_bin*14 + curvedness_bin.

    shape_bin: atan2(k1, k2) unwrapped to [pi/4, 5*pi/4] (the reachable range
    under k1 >= k2) cut into 9 equal bins; curvedness_bin: half-octave steps
    of sqrt(k1^2 + k2^2) above c_min, clamped to 14 steps.
    """
    if c_min <= 0:
        raise ValueError("c_min must be > 0")
    k1 = np.asarray(k1, dtype=np.float64)
    k2 = np.asarray(k2, dtype=np.float64)
    if np.any(k1 < k2 - 1e-12):
        raise ValueError("k1 must be >= k2")
    c = np.hypot(k1, k2)
    phi = np.arctan2(k1, k2)
    phi = np.where(phi < np.pi / 4 - 1e-12, phi + 2 * np.pi, phi)
    shape_bin = np.clip(np.floor(9.0 * (phi - np.pi / 4) / np.pi), 0, 8).astype(np.int64)
    with np.errstate(divide="ignore"):
        curv_bin = np.clip(np.floor(2.0 * np.log2(np.maximum(c, 1e-300) / c_min)),
                           0, 13).astype(np.int64)
    code = 1 + shape_bin * 14 + curv_bin
    code = np.where(c < c_min, 0, code)
    return code.astype(np.uint8)
