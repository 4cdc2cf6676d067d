import numpy as np
import pytest

from exasurf.phantom import PhantomSpec, generate_phantom


def test_sphere_is_distance_from_center():
    spec = PhantomSpec("sphere", (16, 16, 16))
    vol = generate_phantom(spec)
    c = 7.5
    assert vol.values[8, 8, 8] == pytest.approx(np.sqrt(3 * 0.25), abs=1e-5)
    assert vol.values[0, 0, 0] == pytest.approx(np.sqrt(3) * c, rel=1e-6)


def test_zero_noise_is_exact():
    a = generate_phantom(PhantomSpec("sphere", (12, 12, 12), noise=0.0))
    b = generate_phantom(PhantomSpec("sphere", (12, 12, 12), noise=0.0, seed=99))
    np.testing.assert_array_equal(a.values, b.values)


def test_noise_is_seed_deterministic():
    a = generate_phantom(PhantomSpec("bimodal-noise", (16, 16, 16), noise=0.01, seed=5))
    b = generate_phantom(PhantomSpec("bimodal-noise", (16, 16, 16), noise=0.01, seed=5))
    c = generate_phantom(PhantomSpec("bimodal-noise", (16, 16, 16), noise=0.01, seed=6))
    np.testing.assert_array_equal(a.values, b.values)
    assert (a.values != c.values).any()


def test_nested_box_has_gap_between_inner_and_shell():
    spec = PhantomSpec("nested-box", (48, 48, 48), mu_up=1.0, smooth_passes=0)
    vol = generate_phantom(spec)
    nz = 48
    t, g, m = spec.shell_thickness, spec.gap, spec.inner_margin
    mid = 24
    line = vol.values[:, mid, mid]
    assert line[0] == 1.0                      # shell
    assert line[t + 1] == 0.0                  # hollow interior
    i0 = t + g + m
    assert line[i0 + 1] == 1.0                 # inner box
    assert line[nz - t - 2] == 0.0             # gap on far side (no bridge)


def test_nested_box_bridge_connects():
    spec = PhantomSpec("nested-box", (48, 48, 48), mu_up=1.0, smooth_passes=0, bridge=True)
    vol = generate_phantom(spec)
    line = vol.values[:, 24, 24]
    # bridge column fills the far-side gap
    assert (line > 0.5).all() or (line[len(line) // 2:] > 0.5).all()


def test_geometry_must_fit():
    with pytest.raises(ValueError):
        generate_phantom(PhantomSpec("nested-box", (20, 20, 20)))


def test_unknown_kind():
    with pytest.raises(ValueError):
        generate_phantom(PhantomSpec("donut", (16, 16, 16)))
