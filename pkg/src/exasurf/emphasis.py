"""Emphasis color tables over the 127 shape classes.

Convex classes highlight, concave classes darken, with strength growing over
the curvedness bins. Mode "bw" modulates a neutral gray; "blueorange" pulls
shadows toward sky blue and lights toward sun orange. Class 0 (flat) stays
neutral. The same tables are exported for the viewer.
"""

from __future__ import annotations

import numpy as np

N_SHAPE_BINS = 9
N_CURV_BINS = 14
N_CODES = 1 + N_SHAPE_BINS * N_CURV_BINS

GRAY = np.array([0.72, 0.70, 0.66])
SKY_BLUE = np.array([0.45, 0.62, 0.95])
SUN_ORANGE = np.array([1.00, 0.72, 0.30])


def emphasis_scalar(codes: np.ndarray) -> np.ndarray:
    """Signed emphasis in [-1, 1]: positive for convex, negative for concave,
    magnitude from the curvedness bin; flat is 0."""
    codes = np.asarray(codes, dtype=np.int64)
    shape_bin = (codes - 1) // N_CURV_BINS
    curv_bin = (codes - 1) % N_CURV_BINS
    sign = (4 - shape_bin) / 4.0
    mag = (curv_bin + 1) / N_CURV_BINS
    e = sign * mag
    return np.where(codes == 0, 0.0, e)


def emphasis_lut(mode: str) -> np.ndarray:
    """(127, 3) float RGB lookup table for the given mode."""
    codes = np.arange(N_CODES)
    e = emphasis_scalar(codes)
    if mode == "bw":
        v = np.clip(0.5 + 0.45 * e, 0.0, 1.0)
        rgb = np.stack([v, v, v], axis=1)
    elif mode == "blueorange":
        rgb = np.empty((N_CODES, 3))
        for i, ei in enumerate(e):
            if ei >= 0:
                rgb[i] = GRAY + (SUN_ORANGE - GRAY) * ei
            else:
                rgb[i] = GRAY + (SKY_BLUE - GRAY) * (-ei)
        rgb = np.clip(rgb, 0, 1)
    elif mode == "colormap":
        # per-class hue wheel scaled by curvedness
        shape_bin = (codes - 1) // N_CURV_BINS
        curv_bin = (codes - 1) % N_CURV_BINS
        h = shape_bin / N_SHAPE_BINS
        s = 0.25 + 0.75 * (curv_bin + 1) / N_CURV_BINS
        rgb = _hsv_to_rgb(h, s, np.full(N_CODES, 0.9))
        rgb[0] = GRAY
    else:
        raise ValueError(f"unknown emphasis mode {mode!r}")
    rgb[0] = GRAY
    return rgb


def _hsv_to_rgb(h, s, v):
    h = np.asarray(h) % 1.0
    i = np.floor(h * 6).astype(int)
    f = h * 6 - i
    p = v * (1 - s)
    q = v * (1 - f * s)
    t = v * (1 - (1 - f) * s)
    out = np.zeros((len(h), 3))
    for comp, vals in enumerate([(v, q, p, p, t, v), (t, v, v, q, p, p), (p, p, t, v, v, q)]):
        for k in range(6):
            sel = (i % 6) == k
            out[sel, comp] = np.asarray(vals[k])[sel] if np.ndim(vals[k]) else vals[k]
    return out


def bake_vertex_colors(shape_codes: np.ndarray, ao6: np.ndarray | None,
                       mode: str = "blueorange") -> np.ndarray:
    """(V, 3) uint8 colors: emphasis table, optionally multiplied by openness."""
    if mode == "ao":
        if ao6 is None:
            raise ValueError("ao mode needs ao values")
        v = (ao6.astype(np.float64) / 63.0)
        rgb = np.stack([v, v, v], axis=1)
    else:
        lut = emphasis_lut(mode if mode != "ao-emphasis" else "blueorange")
        rgb = lut[np.asarray(shape_codes, dtype=np.int64)]
        if mode == "ao-emphasis":
            if ao6 is None:
                raise ValueError("combined mode needs ao values")
            rgb = rgb * (ao6.astype(np.float64) / 63.0)[:, None]
    return np.clip(np.round(rgb * 255), 0, 255).astype(np.uint8)
