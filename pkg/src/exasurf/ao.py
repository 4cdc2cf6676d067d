"""Ambient-occlusion baking by hemisphere ray casting over the active cells.

Rays leave each vertex on a Fibonacci-lattice hemisphere around its normal
and march the occupied-cell grid (a coarse any-occupied level skips empty
space). A hit's distance feeds the linear falloff; the angular weight
sin(phi)*sqrt(cos(phi)) emphasizes grazing-but-lit directions. The stored
value is openness: 1 fully open, 0 fully occluded.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .contour import ContourData, unpack_point
from .mesh import XQuadMesh

COARSE = 4
SELF_HIT_CLEARANCE = 1.0   # grid steps before hits count
START_OFFSET = 0.5         # grid steps along the normal


def fibonacci_directions(n: int, normal) -> np.ndarray:
    """n near-uniform unit directions on the hemisphere around `normal`."""
    if n < 1:
        raise ValueError("n must be >= 1")
    normal = np.asarray(normal, dtype=np.float64)
    ln = np.linalg.norm(normal)
    if ln < 1e-12:
        raise ValueError("degenerate normal")
    normal = normal / ln
    base = _hemisphere_lattice(n)
    return _rotate_z_to(base, normal)


def _hemisphere_lattice(n: int) -> np.ndarray:
    """Fibonacci spiral on the upper hemisphere; the first direction is +z."""
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - i / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    golden = np.pi * (3.0 - np.sqrt(5.0))
    th = golden * i
    return np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)


def _rotate_z_to(dirs: np.ndarray, normal: np.ndarray) -> np.ndarray:
    z = np.array([0.0, 0.0, 1.0])
    c = float(normal @ z)
    if c > 1.0 - 1e-12:
        return dirs.copy()
    if c < -1.0 + 1e-12:
        out = dirs.copy()
        out[:, 2] *= -1
        out[:, 0] *= -1
        return out
    axis = np.cross(z, normal)
    axis /= np.linalg.norm(axis)
    s = np.sqrt(1.0 - c * c)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    R = np.eye(3) + s * K + (1 - c) * (K @ K)
    return dirs @ R.T


def occupancy_grids(contour: ContourData):
    """Fine active-cell mask plus a coarse any-occupied reduction."""
    nx, ny, nz = contour.dims
    fine = np.zeros((nz - 1, ny - 1, nx - 1), dtype=np.uint8)
    if len(contour.cell_keys):
        x, y, z = unpack_point(contour.cell_keys, contour.dims)
        fine[z, y, x] = 1
    cz = (fine.shape[0] + COARSE - 1) // COARSE
    cy = (fine.shape[1] + COARSE - 1) // COARSE
    cx = (fine.shape[2] + COARSE - 1) // COARSE
    coarse = np.zeros((cz, cy, cx), dtype=np.uint8)
    pad = np.zeros((cz * COARSE, cy * COARSE, cx * COARSE), dtype=np.uint8)
    pad[:fine.shape[0], :fine.shape[1], :fine.shape[2]] = fine
    coarse[:, :, :] = pad.reshape(cz, COARSE, cy, COARSE, cx, COARSE).max(axis=(1, 3, 5))
    return fine, coarse


@njit(cache=True)
def _axis_step(x, d, width):
    """Distance along the ray to the next lattice plane with spacing `width`;
    positions exactly on a plane advance a full slab."""
    if d > 0.0:
        f = x / width - np.floor(x / width)
        return width * (1.0 - f) / d
    if d < 0.0:
        f = x / width - np.floor(x / width)
        if f <= 0.0:
            f = 1.0
        return width * f / (-d)
    return 1e30


@njit(cache=True)
def _march(px, py, pz, dx, dy, dz, fine, coarse, radius, clearance):
    """Distance to the first occupied cell crossed past the clearance, or -1.

    Occupancy is sampled at segment midpoints so rays passing exactly through
    cell corners (common on half-integer-aligned geometry) cannot tunnel
    through a one-cell wall. Empty coarse blocks are skipped whole.
    """
    nz, ny, nx = fine.shape
    t = 0.0
    while t < radius:
        x = px + t * dx
        y = py + t * dy
        z = pz + t * dz
        step = min(_axis_step(x, dx, 1.0), _axis_step(y, dy, 1.0), _axis_step(z, dz, 1.0))
        if step < 1e-9:
            step = 1e-9
        tm = t + 0.5 * step
        mx = int(np.floor(px + tm * dx))
        my = int(np.floor(py + tm * dy))
        mz = int(np.floor(pz + tm * dz))
        if mx < 0 or my < 0 or mz < 0 or mx >= nx or my >= ny or mz >= nz:
            away = True
            if mx < 0 and dx > 0:
                away = False
            if mx >= nx and dx < 0:
                away = False
            if my < 0 and dy > 0:
                away = False
            if my >= ny and dy < 0:
                away = False
            if mz < 0 and dz > 0:
                away = False
            if mz >= nz and dz < 0:
                away = False
            if away:
                return -1.0
            t += step
            continue
        if coarse[mz // COARSE, my // COARSE, mx // COARSE] == 0:
            # the whole coarse block is empty: exit it in one step
            bstep = min(_axis_step(x, dx, float(COARSE)),
                        _axis_step(y, dy, float(COARSE)),
                        _axis_step(z, dz, float(COARSE)))
            t += max(step, bstep)
            continue
        if fine[mz, my, mx] and tm >= clearance:
            return t
        t += step
    return -1.0


@njit(cache=True, parallel=True)
def _bake(verts, normals, base, fine, coarse, radius, clearance, offset, out):
    nrays = base.shape[0]
    for v in prange(verts.shape[0]):
        nx_ = normals[v, 0]
        ny_ = normals[v, 1]
        nz_ = normals[v, 2]
        # rotation from +z to the vertex normal (Rodrigues)
        c = nz_
        wsum = 0.0
        osum = 0.0
        for r in range(nrays):
            bx = base[r, 0]
            by = base[r, 1]
            bz = base[r, 2]
            if c > 1.0 - 1e-12:
                dx, dy, dz = bx, by, bz
            elif c < -1.0 + 1e-12:
                dx, dy, dz = -bx, by, -bz
            else:
                # Rodrigues with axis a = normalize(z x n), angle theta:
                # cos(theta) = c, sin(theta) = s
                ax = -ny_
                ay = nx_
                al = np.sqrt(ax * ax + ay * ay)
                ax /= al
                ay /= al
                s = np.sqrt(max(0.0, 1.0 - c * c))
                one_c = 1.0 - c
                dot = ax * bx + ay * by
                dx = bx * c + s * (ay * bz) + ax * dot * one_c
                dy = by * c - s * (ax * bz) + ay * dot * one_c
                dz = bz * c + s * (ax * by - ay * bx)
            cosphi = dx * nx_ + dy * ny_ + dz * nz_
            if cosphi < 0.0:
                cosphi = 0.0
            sinphi = np.sqrt(max(0.0, 1.0 - cosphi * cosphi))
            w1 = sinphi * np.sqrt(cosphi)
            if w1 <= 1e-12:
                continue
            px = verts[v, 0] + offset * nx_
            py = verts[v, 1] + offset * ny_
            pz = verts[v, 2] + offset * nz_
            d = _march(px, py, pz, dx, dy, dz, fine, coarse, radius, clearance)
            openness = 1.0 if d < 0.0 else d / radius
            wsum += w1
            osum += w1 * openness
        out[v] = osum / wsum if wsum > 0 else 1.0


def compute_ambient_occlusion(mesh: XQuadMesh, contour: ContourData,
                              n_rays: int = 160, radius: float = 64.0) -> np.ndarray:
    """Per-vertex openness in [0, 1] (1 = unoccluded)."""
    if mesh.vertex_normals is None:
        raise ValueError("vertex normals required")
    norms = np.linalg.norm(mesh.vertex_normals, axis=1)
    if len(norms) and norms.min() < 0.5:
        raise ValueError("degenerate vertex normal")
    base = _hemisphere_lattice(n_rays)
    fine, coarse = occupancy_grids(contour)
    out = np.zeros(mesh.n_vertices, dtype=np.float64)
    if mesh.n_vertices:
        _bake(mesh.vertices.astype(np.float64), mesh.vertex_normals.astype(np.float64),
              base, fine, coarse, float(radius), SELF_HIT_CLEARANCE, START_OFFSET, out)
    return out


def angular_weight(phi):
    """sin(phi) * sqrt(cos(phi)); peaks at atan(sqrt(2))."""
    phi = np.asarray(phi, dtype=np.float64)
    return np.sin(phi) * np.sqrt(np.maximum(np.cos(phi), 0.0))


def quantize_ao(ao: np.ndarray) -> np.ndarray:
    """6-bit openness: 0 fully occluded .. 63 fully open."""
    return np.clip(np.round(np.asarray(ao) * 63.0), 0, 63).astype(np.uint8)
