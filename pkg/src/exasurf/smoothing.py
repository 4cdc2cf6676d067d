"""Feature-preserving surface smoothing on the x-quad face mesh.

Face normals are filtered with an iterated weighted vector median over the
faces sharing a vertex (the median's outlier rejection keeps sharp wedges),
then vertex positions relax toward the planes of their incident faces, and
finally per-vertex normals are rebuilt as area-weighted means.
"""

from __future__ import annotations

import numpy as np

from .mesh import XQuadMesh, compute_normals

WEISZFELD_ITERS = 8
WEISZFELD_EPS = 1e-9
MAX_STEP = 0.5            # grid units per vertex-update iteration


def face_adjacency(mesh: XQuadMesh):
    """CSR face -> neighbor faces (sharing at least one vertex, self included)."""
    P = len(mesh.polys)
    lens = mesh.poly_len.astype(np.int64)
    flat = mesh.polys[mesh.polys >= 0]
    rows = np.repeat(np.arange(P), lens)
    order = np.argsort(flat, kind="stable")
    sf = rows[order].astype(np.int64)
    counts = np.bincount(flat, minlength=mesh.n_vertices).astype(np.int64)
    vstart = np.cumsum(counts) - counts
    sq = counts * counts
    tot = int(sq.sum())
    if tot:
        block = np.cumsum(sq) - sq
        vid = np.repeat(np.arange(mesh.n_vertices), sq)
        within = np.arange(tot, dtype=np.int64) - block[vid]
        k = counts[vid]
        a = sf[vstart[vid] + within // k]
        b = sf[vstart[vid] + within % k]
        key = np.unique(a * P + b)
        nb_face = key // P
        nb = key % P
    else:
        nb_face = np.arange(P)
        nb = np.arange(P)
    counts = np.bincount(nb_face, minlength=P)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return offsets, nb


def weighted_vector_median(vectors, weights, groups_offsets, groups_items,
                           iters=WEISZFELD_ITERS):
    """Per-group weighted geometric median of 3-vectors (iterative reweighting).

    groups_offsets/items give CSR groups into `vectors`; returns one median
    per group. Starts from the weighted mean.
    """
    G = len(groups_offsets) - 1
    item_group = np.repeat(np.arange(G), np.diff(groups_offsets))
    v = vectors[groups_items]
    w = weights[groups_items]
    med = np.zeros((G, 3))
    np.add.at(med, item_group, v * w[:, None])
    wsum = np.zeros(G)
    np.add.at(wsum, item_group, w)
    med /= np.maximum(wsum, 1e-30)[:, None]
    for _ in range(iters):
        d = np.linalg.norm(v - med[item_group], axis=1)
        iw = w / np.maximum(d, WEISZFELD_EPS)
        num = np.zeros((G, 3))
        np.add.at(num, item_group, v * iw[:, None])
        den = np.zeros(G)
        np.add.at(den, item_group, iw)
        med = num / np.maximum(den, 1e-30)[:, None]
    return med


def smooth_face_normals(mesh: XQuadMesh, iterations: int = 32) -> XQuadMesh:
    """Iterated area-weighted vector-median filtering of face normals."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if mesh.face_normals is None:
        compute_normals(mesh)
    if len(mesh.polys) == 0:
        return mesh
    offsets, nb = face_adjacency(mesh)
    normals = mesh.face_normals.astype(np.float64)
    area = np.maximum(mesh.face_area.astype(np.float64), 1e-12)
    for _ in range(iterations):
        med = weighted_vector_median(normals, area, offsets, nb)
        ln = np.linalg.norm(med, axis=1, keepdims=True)
        ln[ln < 1e-20] = 1
        normals = med / ln
    mesh.face_normals = normals.astype(np.float32)
    return mesh


def update_vertex_positions(mesh: XQuadMesh, iterations: int = 8) -> XQuadMesh:
    """Relax vertices onto their incident smoothed face planes.

    Each iteration moves a vertex by the mean of n_f * (n_f . (c_f - v)) over
    incident faces f (centroid c_f, unit normal n_f), capped at MAX_STEP per
    iteration; per-vertex normals are rebuilt afterwards.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if len(mesh.polys) == 0:
        return mesh
    P = len(mesh.polys)
    lens = mesh.poly_len.astype(np.int64)
    flat = mesh.polys[mesh.polys >= 0]
    rows = np.repeat(np.arange(P), lens)
    v = mesh.vertices.astype(np.float64)
    n_f = mesh.face_normals.astype(np.float64)
    n_incident = np.bincount(flat, minlength=mesh.n_vertices).astype(np.float64)
    n_incident[n_incident == 0] = 1
    for _ in range(iterations):
        cent = np.zeros((P, 3))
        np.add.at(cent, rows, v[flat])
        cent /= np.maximum(lens, 1)[:, None]
        offset = np.einsum("ij,ij->i", n_f[rows], cent[rows] - v[flat])
        disp = np.zeros((mesh.n_vertices, 3))
        np.add.at(disp, flat, n_f[rows] * offset[:, None])
        disp /= n_incident[:, None]
        step = np.linalg.norm(disp, axis=1, keepdims=True)
        scale = np.minimum(1.0, MAX_STEP / np.maximum(step, 1e-30))
        v = v + disp * scale
    mesh.vertices = v.astype(np.float32)
    # vertex normals: area-weighted mean of the (smoothed) face normals
    tri = mesh.triangles
    vv = mesh.vertices.astype(np.float64)
    tn = np.cross(vv[tri[:, 1]] - vv[tri[:, 0]], vv[tri[:, 2]] - vv[tri[:, 0]])
    ta = 0.5 * np.linalg.norm(tn, axis=1)
    fa = np.zeros(P)
    np.add.at(fa, mesh.tri_poly, ta)
    mesh.face_area = fa.astype(np.float32)
    vn = np.zeros((mesh.n_vertices, 3))
    np.add.at(vn, flat, n_f[rows] * fa[rows, None])
    ln = np.linalg.norm(vn, axis=1, keepdims=True)
    bad = ln[:, 0] < 1e-20
    ln[bad] = 1
    vn /= ln
    vn[bad] = 0
    mesh.vertex_normals = vn.astype(np.float32)
    return mesh
