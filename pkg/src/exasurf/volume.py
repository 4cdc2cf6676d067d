"""Scalar volumes on regular 3D grids: container, import, cropping, resampling.

Values are stored in a C-ordered float32 array indexed ``[z, y, x]`` so that
x is the fastest-varying axis, matching the on-disk raw3d layout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class VolumeError(ValueError):
    """Raised for malformed volume files or invalid volume operations."""


@dataclass(frozen=True)
class Volume3D:
    """Scalar field on a regular grid. dims is (nx, ny, nz)."""

    values: np.ndarray                       # float32, shape (nz, ny, nx)
    spacing_um: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = self.values
        if v.ndim != 3 or v.size == 0:
            raise VolumeError(f"expected a non-empty 3D array, got shape {v.shape}")
        if v.dtype != np.float32 or not v.flags.c_contiguous:
            object.__setattr__(self, "values", np.ascontiguousarray(v, dtype=np.float32))

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.values.shape
        return (nx, ny, nz)

    def validate_finite(self) -> None:
        bad = ~np.isfinite(self.values)
        if bad.any():
            z, y, x = np.unravel_index(int(np.argmax(bad)), self.values.shape)
            raise VolumeError(f"non-finite value at (x={x}, y={y}, z={z})")


def _read_raw3d(path: Path) -> Volume3D:
    sidecar = path.with_suffix(".json")
    payload = path.with_suffix(".f32")
    if not sidecar.exists():
        raise VolumeError(f"missing sidecar {sidecar}")
    if not payload.exists():
        raise VolumeError(f"missing payload {payload}")
    meta = json.loads(sidecar.read_text())
    if meta.get("dtype", "f32le") != "f32le":
        raise VolumeError(f"unsupported dtype {meta.get('dtype')!r}")
    nx, ny, nz = (int(d) for d in meta["dims"])
    raw = np.fromfile(payload, dtype="<f4")
    if raw.size != nx * ny * nz:
        raise VolumeError(
            f"payload holds {raw.size} values but dims {nx}x{ny}x{nz} need {nx * ny * nz}")
    vol = Volume3D(raw.reshape(nz, ny, nx), spacing_um=meta.get("spacing_um"),
                   meta={k: v for k, v in meta.items() if k not in ("dims", "dtype")})
    vol.validate_finite()
    return vol


def _read_hdf5(path: Path, dataset: str) -> Volume3D:
    import h5py

    with h5py.File(path, "r") as f:
        if dataset not in f:
            raise VolumeError(f"dataset {dataset!r} not found in {path}")
        data = np.asarray(f[dataset], dtype=np.float32)
    if data.ndim != 3:
        raise VolumeError(f"dataset {dataset!r} is {data.ndim}-D, expected 3-D")
    vol = Volume3D(data)
    vol.validate_finite()
    return vol


def import_volume(path: str | Path, format: str = "raw3d", dataset: str = "volume") -> Volume3D:
    """Load a volume. ``format`` is "raw3d" (JSON sidecar + .f32 payload) or "hdf5"."""
    path = Path(path)
    if format == "raw3d":
        return _read_raw3d(path)
    if format == "hdf5":
        if not path.exists():
            raise VolumeError(f"missing file {path}")
        return _read_hdf5(path, dataset)
    raise VolumeError(f"unknown format {format!r}")


def write_raw3d(path: str | Path, vol: Volume3D) -> None:
    path = Path(path)
    nx, ny, nz = vol.dims
    meta = {"dims": [nx, ny, nz], "dtype": "f32le"}
    if vol.spacing_um is not None:
        meta["spacing_um"] = vol.spacing_um
    meta.update(vol.meta)
    path.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True))
    vol.values.astype("<f4").tofile(path.with_suffix(".f32"))


def crop_volume(vol: Volume3D, offset: tuple[int, int, int], size: tuple[int, int, int]) -> Volume3D:
    """Extract the sub-box ``[offset, offset+size)`` (given as (x, y, z))."""
    ox, oy, oz = offset
    sx, sy, sz = size
    nx, ny, nz = vol.dims
    if min(ox, oy, oz) < 0 or min(sx, sy, sz) < 1:
        raise VolumeError(f"invalid crop box offset={offset} size={size}")
    if ox + sx > nx or oy + sy > ny or oz + sz > nz:
        raise VolumeError(f"crop box offset={offset} size={size} exceeds dims {vol.dims}")
    sub = vol.values[oz:oz + sz, oy:oy + sy, ox:ox + sx]
    return Volume3D(np.ascontiguousarray(sub), spacing_um=vol.spacing_um, meta=dict(vol.meta))


def gauss3(values: np.ndarray) -> np.ndarray:
    """Separable 3x3x3 binomial (1,2,1)/4 filter with clamped borders."""
    out = values.astype(np.float32, copy=True)
    for axis in range(3):
        n = out.shape[axis]
        lo = np.take(out, np.maximum(np.arange(n) - 1, 0), axis=axis)
        hi = np.take(out, np.minimum(np.arange(n) + 1, n - 1), axis=axis)
        out = (lo + 2.0 * out + hi) * np.float32(0.25)
    return out


def gauss_resample(vol: Volume3D) -> Volume3D:
    """Low-pass with the 3x3x3 binomial kernel, then 2:1 sample every axis.

    Output dims are floor(n/2) per axis; the even-index voxel of each block
    survives (filter first, then decimate).
    """
    nx, ny, nz = vol.dims
    if min(nx, ny, nz) < 2:
        raise VolumeError(f"dims {vol.dims} too small to resample (need >= 2 per axis)")
    f = gauss3(vol.values)
    sub = f[: (nz // 2) * 2 : 2, : (ny // 2) * 2 : 2, : (nx // 2) * 2 : 2]
    spacing = vol.spacing_um * 2.0 if vol.spacing_um is not None else None
    return Volume3D(np.ascontiguousarray(sub), spacing_um=spacing, meta=dict(vol.meta))
