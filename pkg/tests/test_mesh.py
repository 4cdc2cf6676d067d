import itertools

import numpy as np
import pytest

from exasurf.contour import extract_contour, point_lin
from exasurf.dmc_table import (FACET_AXIS, FACET_SIDE, ambiguous_facets,
                               build_config_table, config_table)
from exasurf.mesh import (audit_manifold, build_mesh, compute_normals,
                          signed_volume, triangulate)
from exasurf.volume import Volume3D


def closed_field(f):
    """Wrap a scalar field in a negative frame so the contour is closed."""
    g = np.full(tuple(s + 4 for s in f.shape), f.min() - 1.0, dtype=np.float32)
    g[2:-2, 2:-2, 2:-2] = f
    return Volume3D(g)


def smoothed_noise(n, seed, passes=2):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((n, n, n)).astype(np.float32)
    for _ in range(passes):
        for ax in range(3):
            m = f.shape[ax]
            lo = np.take(f, np.maximum(np.arange(m) - 1, 0), axis=ax)
            hi = np.take(f, np.minimum(np.arange(m) + 1, m - 1), axis=ax)
            f = (lo + 2 * f + hi) / 4
    return f


def full_mesh(vol, tau, prec=6):
    return compute_normals(triangulate(build_mesh(extract_contour(vol, tau, precision=prec))))


def embed_case(pattern, bits_by_facet):
    signs = np.zeros((4, 4, 4), dtype=np.uint8)
    for c in range(8):
        if (pattern >> c) & 1:
            signs[1 + ((c >> 2) & 1), 1 + ((c >> 1) & 1), 1 + (c & 1)] = 1
    cont = extract_contour(signs, 0.5, precision=4)
    for f, bit in bits_by_facet.items():
        axis, side = int(FACET_AXIS[f]), int(FACET_SIDE[f])
        key = point_lin(np.array([1 + side * (axis == 0)]), np.array([1 + side * (axis == 1)]),
                        np.array([1 + side * (axis == 2)]), (4, 4, 4))[0] * 3 + axis
        cont.face_bits[np.searchsorted(cont.face_keys, key)] = bit
    return cont


def test_table_census():
    t = config_table()
    assert len(t.cases) == 656
    assert t.n_cases_inversion == 328
    assert t.n_classes == 27


def test_table_regeneration_is_identical():
    from exasurf.dmc_table import serialize_table
    a = serialize_table(config_table())
    b = serialize_table(build_config_table())
    assert set(a) == set(b)
    for k in a:
        assert np.array_equal(a[k], b[k]), k


def test_empty_pattern_no_faces():
    t = config_table()
    assert t.cases[t.case_id(0x00, ())].n_verts == 0


def test_single_corner_is_triangle_cycle():
    t = config_table()
    case = t.cases[t.case_id(0x01, ())]
    assert case.n_verts == 1
    assert len(case.cycles) == 1
    assert len(case.cycles[0]) == 3


def test_empty_contour_empty_mesh():
    vol = Volume3D(np.zeros((6, 6, 6), dtype=np.float32))
    mesh = full_mesh(vol, 0.5)
    assert mesh.n_vertices == 0
    assert len(mesh.triangles) == 0


def test_single_voxel_closed_surface():
    arr = np.zeros((5, 5, 5), dtype=np.float32)
    arr[2, 2, 2] = 1.0
    mesh = full_mesh(Volume3D(arr), 0.5, prec=8)
    a = audit_manifold(mesh)
    assert mesh.n_vertices == 8
    assert a["bad"] == 0 and a["boundary"] == 0 and a["winding_ok"]
    assert a["euler"] == 2
    assert signed_volume(mesh) > 0


def test_case_audit_sample():
    # a stratified sample across patterns; the full 656-case sweep runs in
    # the acceptance suite
    bad = 0
    for pattern in range(0, 256, 7):
        ambi = ambiguous_facets(pattern)
        for bits in itertools.product((0, 1), repeat=len(ambi)):
            mesh = triangulate(build_mesh(embed_case(pattern, dict(zip(ambi, bits)))))
            a = audit_manifold(mesh)
            bad += a["bad"] + a["boundary"] + (not a["winding_ok"])
    assert bad == 0


@pytest.mark.parametrize("seed", range(8))
def test_random_smoothed_volumes_manifold(seed):
    vol = closed_field(smoothed_noise(24, seed))
    mesh = triangulate(build_mesh(extract_contour(vol, 0.0, precision=6)))
    a = audit_manifold(mesh)
    assert a["bad"] == 0 and a["boundary"] == 0 and a["winding_ok"]


def test_raw_noise_manifold():
    rng = np.random.default_rng(77)
    vol = closed_field(rng.standard_normal((12, 13, 11)).astype(np.float32))
    mesh = triangulate(build_mesh(extract_contour(vol, 0.0, precision=6)))
    a = audit_manifold(mesh)
    assert a["bad"] == 0 and a["boundary"] == 0 and a["winding_ok"]


def test_sphere_euler_and_orientation():
    n = 48
    c = (n - 1) / 2
    axv = (np.arange(n, dtype=np.float32) - c) ** 2
    f = np.sqrt(axv[:, None, None] + axv[None, :, None] + axv[None, None, :])
    mesh = full_mesh(Volume3D(f), 0.9 * c, prec=8)
    a = audit_manifold(mesh)
    assert a["bad"] == 0 and a["winding_ok"] and a["euler"] == 2
    # material outside: air-side normals point at the center, volume negative
    assert signed_volume(mesh) < 0
    r = 0.9 * c
    assert abs(abs(signed_volume(mesh)) - 4 / 3 * np.pi * r**3) / (4 / 3 * np.pi * r**3) < 0.02


def test_solid_ball_positive_volume_and_radial_normals():
    n = 28
    c = (n - 1) / 2
    axv = (np.arange(n, dtype=np.float32) - c) ** 2
    f = 9.0 - np.sqrt(axv[:, None, None] + axv[None, :, None] + axv[None, None, :])
    mesh = full_mesh(Volume3D(np.ascontiguousarray(f)), 0.0, prec=8)
    assert signed_volume(mesh) > 0
    ctr = np.array([c, c, c], dtype=np.float32)
    radial = mesh.vertices - ctr
    radial /= np.linalg.norm(radial, axis=1, keepdims=True)
    dots = np.einsum("ij,ij->i", mesh.vertex_normals, radial)
    assert dots.mean() > 0.98


def test_open_boundary_allowed():
    # material slab touching the grid boundary: open rim, still clean
    arr = np.zeros((8, 8, 8), dtype=np.float32)
    arr[:, :, :4] = 1.0
    mesh = triangulate(build_mesh(extract_contour(Volume3D(arr), 0.5, precision=6)))
    a = audit_manifold(mesh, allow_boundary=True)
    assert a["bad"] == 0 and a["winding_ok"]
    assert a["boundary"] > 0


def test_no_cracks_shared_vertices():
    # adjacent cells reference identical dual vertex ids, so every interior
    # triangle edge is shared exactly twice by construction
    vol = closed_field(smoothed_noise(16, 3))
    mesh = triangulate(build_mesh(extract_contour(vol, 0.0, precision=6)))
    from exasurf.mesh import edge_incidence
    _, counts, _ = edge_incidence(mesh)
    assert (counts == 2).all()


def test_quad_slots_shape():
    vol = closed_field(smoothed_noise(12, 5))
    mesh = build_mesh(extract_contour(vol, 0.0, precision=6))
    assert mesh.quad_slots.shape == (mesh.n_xquads, 4)
    # interior x-quads carry four distinct slots
    interior = (mesh.quad_slots >= 0).all(axis=1)
    qs = mesh.quad_slots[interior]
    assert (np.sort(qs, axis=1)[:, :-1] != np.sort(qs, axis=1)[:, 1:]).all()


def test_triangulation_fans_polygon_sizes():
    # n-gon fans produce n-2 triangles: check on patch membranes if present
    vol = closed_field(smoothed_noise(20, 11, passes=1))
    mesh = triangulate(build_mesh(extract_contour(vol, 0.0, precision=6)))
    lens = mesh.poly_len.astype(int)
    steiner = mesh.poly_steiner
    for r in np.flatnonzero(steiner < 0):
        L = lens[r]
        if L >= 3:
            assert (mesh.tri_poly == r).sum() == L - 2
    for r in np.flatnonzero(steiner >= 0):
        assert (mesh.tri_poly == r).sum() == lens[r]


def test_planar_quad_either_diagonal_coplanar():
    # a flat plane yields planar quads whose two fan triangles share a normal
    arr = np.zeros((8, 8, 8), dtype=np.float32)
    arr[:4] = 1.0
    vol = closed_field(arr)
    mesh = compute_normals(triangulate(build_mesh(extract_contour(vol, 0.5, precision=8))))
    v = mesh.vertices.astype(np.float64)
    T = mesh.triangles
    tn = np.cross(v[T[:, 1]] - v[T[:, 0]], v[T[:, 2]] - v[T[:, 0]])
    tn /= np.linalg.norm(tn, axis=1, keepdims=True)
    checked = 0
    for r in np.flatnonzero(mesh.poly_len == 4):
        quad = mesh.polys[r, :4]
        # only quads on the flat face, away from the box corners
        if np.ptp(v[quad][:, 0]) > 1e-6:
            continue
        pair = np.flatnonzero(mesh.tri_poly == r)
        if len(pair) == 2:
            assert np.dot(tn[pair[0]], tn[pair[1]]) > 0.999
            checked += 1
    assert checked > 10


def test_vertex_normals_unit_or_zero():
    vol = closed_field(smoothed_noise(16, 9))
    mesh = full_mesh(vol, 0.0)
    ln = np.linalg.norm(mesh.vertex_normals, axis=1)
    assert np.all((np.abs(ln - 1) < 1e-5) | (ln == 0))


def test_shipped_table_bytes_match_regeneration():
    from exasurf.dmc_table import _data_path, serialize_table
    import numpy as np
    path = _data_path()
    assert path.exists()
    with np.load(path) as z:
        shipped = {k: z[k] for k in z.files}
    regen = serialize_table(build_config_table())
    assert set(shipped) == set(regen)
    for k in regen:
        assert np.array_equal(shipped[k], regen[k]), k
