import numpy as np
import pytest

from exasurf.denoise import TUKEY_SCALE, denoise_joint_bilateral, tukey_weight
from exasurf.volume import Volume3D


def test_tukey_at_zero():
    assert tukey_weight(0.0, 2.1262) == 1.0


def test_tukey_at_cutoff():
    assert tukey_weight(2.1262, 2.1262) == 0.0
    assert tukey_weight(5.0, 2.1262) == 0.0


def test_tukey_matches_gaussian_attenuation_at_sigma():
    # with sigma' = 2.1262 * sigma, Tukey(sigma) equals exp(-1/2)
    w = tukey_weight(1.0, TUKEY_SCALE)
    assert abs(w - np.exp(-0.5)) < 1e-4


def test_tukey_monotone_nonincreasing():
    xs = np.linspace(0, 3, 301)
    w = tukey_weight(xs, 2.1262)
    assert np.all(np.diff(w) <= 1e-9)


def test_denoise_constant_fixed_point():
    vol = Volume3D(np.full((10, 10, 10), 1.5, dtype=np.float32))
    out = denoise_joint_bilateral(vol, sigma=0.1, iterations=2)
    np.testing.assert_allclose(out.values, 1.5, atol=1e-6)


def test_denoise_preserves_value_range():
    rng = np.random.default_rng(5)
    vol = Volume3D(rng.random((12, 12, 12)).astype(np.float32))
    out = denoise_joint_bilateral(vol, sigma=0.2, iterations=2)
    assert out.values.min() >= vol.values.min() - 1e-6
    assert out.values.max() <= vol.values.max() + 1e-6


def step_volume(n=32, step=1.0, noise_sigma=0.1, seed=2):
    """Step edge at x = n/2 - 0.5 plus Gaussian noise."""
    rng = np.random.default_rng(seed)
    f = np.zeros((n, n, n), dtype=np.float32)
    f[:, :, n // 2:] = step
    noisy = f + rng.normal(0, noise_sigma * step, f.shape).astype(np.float32)
    return Volume3D(noisy), f


def half_height_crossing(profile, level):
    above = np.flatnonzero(profile >= level)
    i = above[0]
    if i == 0:
        return 0.0
    x0, y0, y1 = i - 1, profile[i - 1], profile[i]
    return x0 + (level - y0) / (y1 - y0)


def test_denoise_step_edge_keeps_position_and_cuts_noise():
    vol, clean = step_volume()
    sigma = 0.1
    out = denoise_joint_bilateral(vol, sigma=sigma, iterations=2)
    # edge position from the mean profile along x
    prof_before = vol.values.mean(axis=(0, 1))
    prof_after = out.values.mean(axis=(0, 1))
    e0 = half_height_crossing(prof_before, 0.5)
    e1 = half_height_crossing(prof_after, 0.5)
    assert abs(e1 - e0) < 0.5
    # voxel-wise noise std drops by >= 40%, measured away from the edge
    n = vol.values.shape[2]
    sl = (slice(None), slice(None), slice(0, n // 2 - 3))
    std_before = float((vol.values[sl] - clean[sl]).std())
    std_after = float((out.values[sl] - clean[sl]).std())
    assert std_after <= 0.6 * std_before


def test_denoise_validates_arguments():
    vol = Volume3D(np.zeros((4, 4, 4), dtype=np.float32))
    with pytest.raises(ValueError):
        denoise_joint_bilateral(vol, sigma=0.0)
    with pytest.raises(ValueError):
        denoise_joint_bilateral(vol, sigma=0.1, iterations=0)
    with pytest.raises(ValueError):
        denoise_joint_bilateral(vol, sigma=0.1, range_fn="box")
