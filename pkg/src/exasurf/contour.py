"""Isosurface sign/crossing structure extracted from a volume.

Grid points carry a sign (value >= tau means inside the material). Active
edges are grid edges whose endpoint signs differ; active cells have at least
one active edge. Facets with all four edges active are ambiguous and carry a
decider bit. Everything is kept in canonical order: edges and facets sort by
(z, y, x, axis) of their lower corner, cells by (z, y, x).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .volume import Volume3D

DECIDER_EPS = 1e-12


@dataclass
class ContourData:
    dims: tuple[int, int, int]            # (nx, ny, nz) grid points
    tau: float
    precision: int                        # offset quantization bits N (0: offsets unset)
    signs: np.ndarray                     # uint8 (nz, ny, nx)
    edge_keys: np.ndarray                 # int64 lin*3 + axis, sorted ascending
    edge_q: np.ndarray                    # uint16 quantized offsets per active edge
    cell_keys: np.ndarray                 # int64 x-fastest cell linear index, sorted
    cell_patterns: np.ndarray             # uint8 corner sign pattern per active cell
    face_keys: np.ndarray                 # int64 lin*3 + normal axis, ambiguous facets
    face_bits: np.ndarray                 # uint8 decider bit per ambiguous facet

    @property
    def n_active_edges(self) -> int:
        return len(self.edge_keys)

    @property
    def n_active_cells(self) -> int:
        return len(self.cell_keys)

    def same_structure(self, other: "ContourData") -> bool:
        return (self.dims == other.dims
                and np.array_equal(self.signs, other.signs)
                and np.array_equal(self.edge_keys, other.edge_keys)
                and np.array_equal(self.edge_q, other.edge_q)
                and np.array_equal(self.cell_keys, other.cell_keys)
                and np.array_equal(self.cell_patterns, other.cell_patterns)
                and np.array_equal(self.face_keys, other.face_keys)
                and np.array_equal(self.face_bits, other.face_bits))


def point_lin(x, y, z, dims):
    nx, ny, nz = dims
    return (z.astype(np.int64) * ny + y) * nx + x


def unpack_point(lin, dims):
    nx, ny, nz = dims
    z, r = np.divmod(lin, nx * ny)
    y, x = np.divmod(r, nx)
    return x, y, z


# the two in-plane axes for a facet with the given normal axis
FACE_TANGENTS = {0: (1, 2), 1: (0, 2), 2: (0, 1)}


def asymptotic_decider(face_corner_values, tau: float) -> int:
    """Resolve an ambiguous facet from its bilinear saddle value.

    corner values ordered (f00, f10, f01, f11) in the facet's two tangent
    axes. Returns 1 when the tau-positive corners connect across the facet,
    0 when they are separated (also the degenerate-denominator default).
    """
    f00, f10, f01, f11 = (float(v) for v in face_corner_values)
    denom = f00 + f11 - f01 - f10
    if abs(denom) < DECIDER_EPS:
        return 0
    saddle = (f00 * f11 - f01 * f10) / denom
    return int(saddle >= tau)


def _active_edges_axis(signs: np.ndarray, axis_np: int):
    s = signs
    if axis_np == 2:    # x
        diff = s[:, :, 1:] != s[:, :, :-1]
    elif axis_np == 1:  # y
        diff = s[:, 1:, :] != s[:, :-1, :]
    else:               # z
        diff = s[1:, :, :] != s[:-1, :, :]
    return np.nonzero(diff)


def extract_contour(vol_or_signs, tau: float, precision: int = 0,
                    values: np.ndarray | None = None) -> ContourData:
    """Build the full contour structure.

    Accepts a Volume3D (offsets and decider bits computed from its values) or
    a raw sign array (offsets default to mid-edge, deciders to the separated
    configuration) for sign-only use.
    """
    if isinstance(vol_or_signs, Volume3D):
        values = vol_or_signs.values
        signs = (values >= np.float32(tau)).astype(np.uint8)
    else:
        signs = np.ascontiguousarray(vol_or_signs, dtype=np.uint8)
    nz, ny, nx = signs.shape
    dims = (nx, ny, nz)

    # active edges: two passes in spirit (count via nonzero, then fill)
    edge_parts = []
    q_parts = []
    qmax = (1 << precision) - 1 if precision > 0 else 0
    for axis in range(3):                      # axis in (x, y, z)
        axis_np = 2 - axis
        z, y, x = _active_edges_axis(signs, axis_np)
        keys = point_lin(x, y, z, dims) * 3 + axis
        edge_parts.append(keys)
        if precision > 0:
            if values is not None:
                v0 = values[z, y, x]
                step = [(0, 0, 1), (0, 1, 0), (1, 0, 0)][axis]
                v1 = values[z + step[0], y + step[1], x + step[2]]
                t = (tau - v0.astype(np.float64)) / (v1.astype(np.float64) - v0)
                t = np.clip(t, 0.0, np.nextafter(1.0, 0.0))
            else:
                t = np.full(len(keys), 0.5)
            q = np.minimum(np.floor(t * (1 << precision)).astype(np.int64), qmax)
            q_parts.append(q.astype(np.uint16))
    edge_keys = np.concatenate(edge_parts) if edge_parts else np.zeros(0, np.int64)
    order = np.argsort(edge_keys, kind="stable")
    edge_keys = edge_keys[order]
    if precision > 0:
        edge_q = np.concatenate(q_parts)[order] if len(edge_keys) else np.zeros(0, np.uint16)
    else:
        edge_q = np.zeros(len(edge_keys), dtype=np.uint16)

    cell_keys, cell_patterns = _active_cells(signs)
    face_keys, face_bits = _ambiguous_faces(signs, values, tau)
    return ContourData(dims=dims, tau=float(tau), precision=precision, signs=signs,
                       edge_keys=edge_keys, edge_q=edge_q,
                       cell_keys=cell_keys, cell_patterns=cell_patterns,
                       face_keys=face_keys, face_bits=face_bits)


def build_sign_field(vol: Volume3D, tau: float) -> ContourData:
    """Signs and active sets only (crossing offsets left at zero)."""
    vmin, vmax = float(vol.values.min()), float(vol.values.max())
    if not (vmin <= tau <= vmax):
        import warnings
        warnings.warn(f"tau={tau} outside value range [{vmin}, {vmax}]")
    return extract_contour(vol, tau, precision=0)


def cell_pattern_grid(signs: np.ndarray) -> np.ndarray:
    """8-bit corner sign pattern for every cell (corner bit c: x=bit0 of c...)."""
    nz, ny, nx = signs.shape
    pat = np.zeros((nz - 1, ny - 1, nx - 1), dtype=np.uint8)
    for c in range(8):
        cx, cy, cz = c & 1, (c >> 1) & 1, (c >> 2) & 1
        pat |= signs[cz:cz + nz - 1, cy:cy + ny - 1, cx:cx + nx - 1] << c
    return pat


def _active_cells(signs: np.ndarray):
    nz, ny, nx = signs.shape
    pat = cell_pattern_grid(signs)
    mixed = (pat != 0) & (pat != 255)
    z, y, x = np.nonzero(mixed)
    keys = point_lin(x, y, z, (nx, ny, nz))
    return keys, pat[z, y, x]


def _face_corner_indices(axis: int, z, y, x):
    """The 4 corner point coordinates (f00, f10, f01, f11) of a facet with
    the given normal axis and lower corner (x, y, z); tangent order is
    (lower tangent axis, higher tangent axis)."""
    ta, tb = FACE_TANGENTS[axis]
    def offs(da, db):
        dx = (1 if ta == 0 else 0) * da + (1 if tb == 0 else 0) * db
        dy = (1 if ta == 1 else 0) * da + (1 if tb == 1 else 0) * db
        dz = (1 if ta == 2 else 0) * da + (1 if tb == 2 else 0) * db
        return x + dx, y + dy, z + dz
    return [offs(0, 0), offs(1, 0), offs(0, 1), offs(1, 1)]


def _ambiguous_faces(signs: np.ndarray, values: np.ndarray | None, tau: float):
    nz, ny, nx = signs.shape
    keys_parts, bits_parts = [], []
    for axis in range(3):
        ta, tb = FACE_TANGENTS[axis]
        # facet grid extents: full along the normal axis, n-1 along tangents
        ex = nx - (0 if axis == 0 else 1)
        ey = ny - (0 if axis == 1 else 1)
        ez = nz - (0 if axis == 2 else 1)
        z, y, x = np.meshgrid(np.arange(ez), np.arange(ey), np.arange(ex), indexing="ij")
        corners = _face_corner_indices(axis, z, y, x)
        s00 = signs[corners[0][2], corners[0][1], corners[0][0]]
        s10 = signs[corners[1][2], corners[1][1], corners[1][0]]
        s01 = signs[corners[2][2], corners[2][1], corners[2][0]]
        s11 = signs[corners[3][2], corners[3][1], corners[3][0]]
        ambig = (s00 == s11) & (s10 == s01) & (s00 != s10)
        az, ay, ax_ = z[ambig], y[ambig], x[ambig]
        if len(az) == 0:
            continue
        keys = point_lin(ax_, ay, az, (nx, ny, nz)) * 3 + axis
        if values is not None:
            cs = _face_corner_indices(axis, az, ay, ax_)
            f00 = values[cs[0][2], cs[0][1], cs[0][0]].astype(np.float64)
            f10 = values[cs[1][2], cs[1][1], cs[1][0]].astype(np.float64)
            f01 = values[cs[2][2], cs[2][1], cs[2][0]].astype(np.float64)
            f11 = values[cs[3][2], cs[3][1], cs[3][0]].astype(np.float64)
            denom = f00 + f11 - f01 - f10
            saddle = np.where(np.abs(denom) < DECIDER_EPS, -np.inf,
                              (f00 * f11 - f01 * f10) / np.where(np.abs(denom) < DECIDER_EPS, 1.0, denom))
            bits = (saddle >= tau).astype(np.uint8)
        else:
            bits = np.zeros(len(keys), dtype=np.uint8)
        keys_parts.append(keys)
        bits_parts.append(bits)
    if not keys_parts:
        return np.zeros(0, np.int64), np.zeros(0, np.uint8)
    keys = np.concatenate(keys_parts)
    bits = np.concatenate(bits_parts)
    order = np.argsort(keys, kind="stable")
    return keys[order], bits[order]


def dequantize_offsets(q: np.ndarray, precision: int) -> np.ndarray:
    """Crossing offset reconstruction: midpoint of the quantization bin."""
    if precision <= 0:
        return np.full(len(q), 0.5)
    return (q.astype(np.float64) + 0.5) / float(1 << precision)
