import json

import numpy as np
import pytest

from exasurf.volume import (Volume3D, VolumeError, crop_volume, gauss3,
                            gauss_resample, import_volume, write_raw3d)


def make_vol(arr):
    return Volume3D(np.asarray(arr, dtype=np.float32))


def test_raw3d_roundtrip(tmp_path):
    vol = make_vol(np.arange(24).reshape(2, 3, 4))
    write_raw3d(tmp_path / "v", vol)
    back = import_volume(tmp_path / "v", "raw3d")
    assert back.dims == (4, 3, 2)
    np.testing.assert_array_equal(back.values, vol.values)


def test_raw3d_zero_volume(tmp_path):
    vol = make_vol(np.zeros((2, 2, 2)))
    write_raw3d(tmp_path / "z", vol)
    back = import_volume(tmp_path / "z")
    assert back.dims == (2, 2, 2)
    assert not back.values.any()


def test_raw3d_payload_mismatch(tmp_path):
    (tmp_path / "bad.json").write_text(json.dumps({"dims": [2, 2, 2], "dtype": "f32le"}))
    np.zeros(7, dtype="<f4").tofile(tmp_path / "bad.f32")
    with pytest.raises(VolumeError, match="7 values"):
        import_volume(tmp_path / "bad")


def test_missing_file(tmp_path):
    with pytest.raises(VolumeError, match="missing"):
        import_volume(tmp_path / "nope")


def test_nonfinite_rejected_with_location(tmp_path):
    arr = np.zeros((2, 3, 4), dtype=np.float32)
    arr[1, 2, 3] = np.nan
    write_raw3d(tmp_path / "n", Volume3D(arr))
    with pytest.raises(VolumeError, match=r"x=3, y=2, z=1"):
        import_volume(tmp_path / "n")


def test_hdf5_roundtrip(tmp_path):
    h5py = pytest.importorskip("h5py")
    arr = np.random.default_rng(0).random((4, 5, 6)).astype(np.float32)
    with h5py.File(tmp_path / "v.h5", "w") as f:
        f.create_dataset("volume", data=arr)
    vol = import_volume(tmp_path / "v.h5", "hdf5")
    np.testing.assert_array_equal(vol.values, arr)


def test_crop_full_is_identity():
    vol = make_vol(np.random.default_rng(1).random((5, 6, 7)))
    out = crop_volume(vol, (0, 0, 0), vol.dims)
    np.testing.assert_array_equal(out.values, vol.values)


def test_crop_matches_ramp():
    # analytic ramp: value = x + 10y + 100z
    nz, ny, nx = 8, 9, 10
    z, y, x = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    vol = make_vol(x + 10 * y + 100 * z)
    out = crop_volume(vol, (2, 3, 4), (5, 4, 3))
    zz, yy, xx = np.meshgrid(np.arange(3), np.arange(4), np.arange(5), indexing="ij")
    expect = (xx + 2) + 10 * (yy + 3) + 100 * (zz + 4)
    np.testing.assert_array_equal(out.values, expect.astype(np.float32))


def test_crop_out_of_range():
    vol = make_vol(np.zeros((4, 4, 4)))
    with pytest.raises(VolumeError, match="exceeds"):
        crop_volume(vol, (2, 0, 0), (3, 2, 2))


def test_resample_dims_floor():
    vol = make_vol(np.zeros((9, 6, 5)))
    out = gauss_resample(vol)
    assert out.dims == (2, 3, 4)


def test_resample_constant_stays_constant():
    vol = make_vol(np.full((8, 8, 8), 3.25))
    out = gauss_resample(vol)
    np.testing.assert_allclose(out.values, 3.25, rtol=0, atol=0)


def test_resample_impulse_gives_kernel_center():
    # unit impulse at an even-aligned interior voxel: after filtering, the
    # 3x3x3 binomial kernel is sampled on the stride-2 output lattice, so only
    # the center weight 8/64 survives.
    arr = np.zeros((8, 8, 8), dtype=np.float32)
    arr[4, 4, 4] = 1.0
    out = gauss_resample(Volume3D(arr))
    expect = np.zeros((4, 4, 4), dtype=np.float32)
    expect[2, 2, 2] = 8.0 / 64.0
    np.testing.assert_allclose(out.values, expect, atol=1e-7)


def test_resample_too_small():
    with pytest.raises(VolumeError):
        gauss_resample(make_vol(np.zeros((1, 4, 4))))


def test_gauss3_is_normalized_binomial():
    arr = np.zeros((5, 5, 5), dtype=np.float32)
    arr[2, 2, 2] = 64.0
    out = gauss3(arr)
    # separable (1,2,1)/4 per axis
    w1 = np.array([1, 2, 1], dtype=np.float32) / 4.0
    expect = np.zeros((5, 5, 5), dtype=np.float32)
    expect[1:4, 1:4, 1:4] = 64.0 * w1[:, None, None] * w1[None, :, None] * w1[None, None, :]
    np.testing.assert_allclose(out, expect, atol=1e-6)
