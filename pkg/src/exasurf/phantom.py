"""Synthetic test volumes standing in for scanner output."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .volume import Volume3D, gauss3


@dataclass(frozen=True)
class PhantomSpec:
    """Parameters for a deterministic synthetic volume.

    kind:
      - "sphere": value at each voxel is the distance from the volume center.
      - "nested-box": material outer shell around a hollow gap around a
        material inner box, with an optional bridge joining inner box and
        shell through the gap.
      - "bimodal-noise": two half-spaces at mu_low / mu_up.
    Gaussian noise with std ``noise`` is added (seeded, PCG64).
    """

    kind: str
    dims: tuple[int, int, int]
    mu_low: float = 0.0
    mu_up: float = 0.1
    noise: float = 0.0
    seed: int = 0
    # nested-box geometry, in voxels
    shell_thickness: int = 6
    gap: int = 2
    inner_margin: int = 0      # extra inset of the inner box beyond the gap
    bridge: bool = False
    bridge_halfwidth: int = 2
    smooth_passes: int = 1

    def validate(self) -> None:
        nx, ny, nz = self.dims
        if min(nx, ny, nz) < 4:
            raise ValueError(f"dims {self.dims} too small")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if self.kind == "nested-box":
            need = 2 * (2 + self.shell_thickness + self.gap + self.inner_margin) + 4
            if min(nx, ny, nz) < need:
                raise ValueError(
                    f"nested-box geometry needs dims >= {need}, got {self.dims}")


def _radial_field(dims) -> np.ndarray:
    nx, ny, nz = dims
    cz, cy, cx = (nz - 1) / 2.0, (ny - 1) / 2.0, (nx - 1) / 2.0
    z = (np.arange(nz, dtype=np.float32) - cz) ** 2
    y = (np.arange(ny, dtype=np.float32) - cy) ** 2
    x = (np.arange(nx, dtype=np.float32) - cx) ** 2
    return np.sqrt(z[:, None, None] + y[None, :, None] + x[None, None, :])


def _nested_box_mask(spec: PhantomSpec) -> np.ndarray:
    """Shell, then an air border of 2 voxels around it so the outer surface
    closes, then the inner solid box a true `gap` voxels inside the shell."""
    nx, ny, nz = spec.dims
    t, g, m = spec.shell_thickness, spec.gap, spec.inner_margin
    b = 2                      # air frame outside the shell
    mask = np.zeros((nz, ny, nx), dtype=bool)
    mask[b:nz - b, b:ny - b, b:nx - b] = True
    mask[b + t:nz - b - t, b + t:ny - b - t, b + t:nx - b - t] = False
    i0 = b + t + g + m
    mask[i0:nz - i0, i0:ny - i0, i0:nx - i0] = True
    if spec.bridge:
        # glued-contact bridge (+z side): a fused collar joins the inner box
        # to the shell wall, and a one-plane annular slit undercuts the
        # collar rim. The roofed notch ring is the reentrant glue-line crease
        # that curvature segmentation must cut; straight or tapering folds
        # round off below the threshold under feature-preserving smoothing.
        r1 = spec.bridge_halfwidth + 6.0
        z_base = nz - i0 - 1
        z_wall = nz - b - t
        cy, cx = (ny - 1) / 2.0, (nx - 1) / 2.0
        zz, yy, xx = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
        # square plan: groove segments run straight along each side (no
        # along-crease curvature to dilute the valley)
        r = np.maximum(np.abs(xx - cx), np.abs(yy - cy))
        collar = (r <= r1) & (zz >= z_base) & (zz <= z_wall + 1)
        mask |= collar
    return mask


def _groove_overlay(spec: PhantomSpec, values: np.ndarray) -> np.ndarray:
    """Analytic V-groove ring incised around the bridge collar (sub-voxel
    walls; a voxelized V would quantize into blunt stair steps). The ~28
    degree wedge stays below the default segmentation threshold after the
    default smoothing schedule, marking the glue line to cut."""
    nx, ny, nz = spec.dims
    b = 2
    t, g = spec.shell_thickness, spec.gap
    i0 = b + t + g + spec.inner_margin
    r1 = spec.bridge_halfwidth + 6.0
    z_wall = nz - b - t
    d_g, slope = 12.0, 5.0
    cy, cx = (ny - 1) / 2.0, (nx - 1) / 2.0
    zz, yy, xx = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    r = np.maximum(np.abs(xx - cx), np.abs(yy - cy))
    depth = (zz - (z_wall - d_g)) / slope
    sdf = depth - np.abs(r - r1)          # > 0 inside the air wedge
    applies = (zz >= z_wall - d_g) & (zz < z_wall) & (np.abs(r - r1) < d_g / slope + 2)
    v_groove = spec.mu_low + (spec.mu_up - spec.mu_low) * np.clip(0.5 - sdf, 0.0, 1.0)
    out = np.where(applies, np.minimum(values, v_groove), values).astype(np.float32)
    # pocket notches where the groove ring turns: reentrant corners stay
    # deeply concave under smoothing and keep the boundary ring closed
    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            px, py = cx + sx * r1, cy + sy * r1
            pocket = ((np.abs(xx - px) <= 2.0) & (np.abs(yy - py) <= 2.0)
                      & (zz >= z_wall - 5) & (zz < z_wall))
            out = np.where(pocket, np.float32(spec.mu_low), out)
    return out


def _bimodal_field(spec: PhantomSpec) -> np.ndarray:
    nx, ny, nz = spec.dims
    f = np.full((nz, ny, nx), spec.mu_low, dtype=np.float32)
    f[:, :, nx // 2:] = spec.mu_up
    return f


def generate_phantom(spec: PhantomSpec) -> Volume3D:
    """Deterministic synthetic volume for the given spec and seed."""
    spec.validate()
    if spec.kind == "sphere":
        f = _radial_field(spec.dims)
    elif spec.kind == "nested-box":
        mask = _nested_box_mask(spec)
        f = np.where(mask, np.float32(spec.mu_up), np.float32(spec.mu_low))
        for _ in range(spec.smooth_passes):
            f = gauss3(f)
        if spec.bridge:
            f = _groove_overlay(spec, f)
    elif spec.kind == "bimodal-noise":
        f = _bimodal_field(spec)
    else:
        raise ValueError(f"unknown phantom kind {spec.kind!r}")
    if spec.noise > 0:
        rng = np.random.default_rng(spec.seed)
        f = f + rng.normal(0.0, spec.noise, size=f.shape).astype(np.float32)
    meta = {"phantom": spec.kind, "seed": spec.seed, "rng": "pcg64"}
    return Volume3D(f.astype(np.float32), meta=meta)
