import numpy as np
import pytest

from exasurf.contour import (asymptotic_decider, build_sign_field,
                             dequantize_offsets, extract_contour, unpack_point)
from exasurf.volume import Volume3D


def vol_from(arr):
    return Volume3D(np.asarray(arr, dtype=np.float32))


def test_empty_contour():
    vol = vol_from(np.zeros((6, 6, 6)))
    c = build_sign_field(vol, 0.5)
    assert c.n_active_edges == 0
    assert c.n_active_cells == 0
    assert len(c.face_keys) == 0


def test_single_voxel_above_tau():
    arr = np.zeros((5, 5, 5), dtype=np.float32)
    arr[2, 2, 2] = 1.0
    c = extract_contour(vol_from(arr), 0.5, precision=8)
    assert c.n_active_edges == 6
    assert c.n_active_cells == 8
    # all six edges touch the hot point
    x, y, z = unpack_point(c.edge_keys // 3, c.dims)
    for xi, yi, zi, axis in zip(x, y, z, c.edge_keys % 3):
        p = np.array([xi, yi, zi])
        p2 = p.copy()
        p2[axis] += 1
        assert tuple(p) == (2, 2, 2) or tuple(p2) == (2, 2, 2)


def test_edge_keys_sorted_canonically():
    rng = np.random.default_rng(3)
    vol = vol_from(rng.random((8, 8, 8)))
    c = extract_contour(vol, 0.5, precision=4)
    assert np.all(np.diff(c.edge_keys) > 0)
    assert np.all(np.diff(c.cell_keys) > 0)
    assert np.all(np.diff(c.face_keys) > 0)


def test_decider_alternating_separated():
    # corners (f00, f10, f01, f11) = (1, 0, 1, 0) is not ambiguous in signs;
    # classic alternating case: positives on the diagonal
    assert asymptotic_decider((1.0, 0.0, 0.0, 1.0), 0.6) == 0   # saddle 0.5 < 0.6
    assert asymptotic_decider((1.0, 0.0, 0.0, 1.0), 0.4) == 1


def test_decider_scale_invariance():
    base = (1.3, 0.2, 0.1, 0.9)
    for tau in (0.5, 0.6):
        b = asymptotic_decider(base, tau)
        assert asymptotic_decider(tuple(2 * v for v in base), 2 * tau) == b


def test_decider_degenerate_denominator_separates():
    # f00 + f11 == f01 + f10 -> saddle at infinity -> separated
    assert asymptotic_decider((1.0, 0.5, 0.5, 0.0), 0.4) == 0


def test_decider_matches_bilinear_sampling():
    # oracle: dense bilinear interpolation over the facet
    rng = np.random.default_rng(11)
    for _ in range(50):
        f = rng.random(4)
        s = f >= 0.5
        if not (s[0] == s[3] and s[1] == s[2] and s[0] != s[1]):
            continue
        u = np.linspace(0, 1, 201)
        uu, vv = np.meshgrid(u, u)
        grid = (f[0] * (1 - uu) * (1 - vv) + f[1] * uu * (1 - vv)
                + f[2] * (1 - uu) * vv + f[3] * uu * vv)
        inside = grid >= 0.5
        # positive corners connected iff a 4-connected path joins them
        from scipy.ndimage import label
        lab, _ = label(inside)
        connected = lab[0, 0] != 0 and lab[0, 0] == lab[-1, -1]
        if s[0]:
            expect = 1 if connected else 0
        else:
            lab, _ = label(~inside)
            connected_neg = lab[0, 0] != 0 and lab[0, 0] == lab[-1, -1]
            # negatives connected means positives separated
            expect = 0 if connected_neg else 1
        assert asymptotic_decider(tuple(f), 0.5) == expect


def test_quantizer_example_and_bound():
    arr = np.zeros((2, 2, 2), dtype=np.float32)
    # edge from 0 to 1 along x with value 0 -> 1, tau = 0.5: crossing t = 0.5
    arr[:, :, 1] = 1.0
    c = extract_contour(vol_from(arr), 0.5, precision=4)
    assert c.edge_q[0] == 8
    t_hat = dequantize_offsets(c.edge_q, 4)[0]
    assert t_hat == pytest.approx(0.53125)
    assert abs(t_hat - 0.5) <= 0.5 * 2 ** -4


def test_quantization_bound_randomized():
    rng = np.random.default_rng(7)
    for N in (4, 8):
        t = rng.random(20000)
        q = np.minimum(np.floor(t * (1 << N)), (1 << N) - 1)
        t_hat = (q + 0.5) / (1 << N)
        assert np.max(np.abs(t_hat - t)) <= 0.5 * 2 ** -N + 1e-12


def test_tau_outside_range_warns():
    vol = vol_from(np.zeros((4, 4, 4)))
    with pytest.warns(UserWarning):
        build_sign_field(vol, 5.0)
