import numpy as np
import pytest

from exasurf.contour import extract_contour
from exasurf.mesh import audit_manifold, build_mesh, compute_normals, triangulate
from exasurf.mesh_ops import _min_area_triangulation, boundary_loops, cluster_vertices, fill_holes
from exasurf.volume import Volume3D


def plane_mesh(n=24):
    arr = np.zeros((n, n, n), dtype=np.float32)
    arr[: n // 2] = 1.0
    g = np.full((n + 4, n + 4, n + 4), -1.0, dtype=np.float32)
    g[2:-2, 2:-2, 2:-2] = arr
    vol = Volume3D(g)
    return compute_normals(triangulate(build_mesh(extract_contour(vol, 0.5, precision=8))))


def sphere_mesh(n=32, frac=0.75, solid=True):
    c = (n - 1) / 2
    axv = (np.arange(n, dtype=np.float32) - c) ** 2
    r = np.sqrt(axv[:, None, None] + axv[None, :, None] + axv[None, None, :])
    f = (frac * c - r) if solid else r
    return compute_normals(triangulate(build_mesh(
        extract_contour(Volume3D(np.ascontiguousarray(f)), 0.0 if solid else frac * c, precision=8))))


def test_cluster_plane_reduces_heavily():
    mesh = plane_mesh()
    t0 = len(mesh.triangles)
    out = cluster_vertices(mesh, angle_tol=20.0, pos_tol=1.0, levels=5)
    # the flat face collapses almost entirely; the closed box keeps its frame
    assert len(out.triangles) < t0
    a = audit_manifold(out)
    assert a["bad"] == 0 and a["winding_ok"]


def test_cluster_preserves_manifold_on_sphere():
    mesh = sphere_mesh()
    out = cluster_vertices(mesh, angle_tol=25.0, pos_tol=0.8, levels=3)
    a = audit_manifold(out)
    assert a["bad"] == 0 and a["boundary"] == 0 and a["winding_ok"]
    assert len(out.triangles) <= len(mesh.triangles)


def test_cluster_sphere_distance_bound():
    mesh = sphere_mesh(n=32, frac=0.75)
    pos_tol = 0.6
    out = cluster_vertices(mesh, angle_tol=20.0, pos_tol=pos_tol, levels=3)
    c = (32 - 1) / 2
    r = 0.75 * c
    d = np.abs(np.linalg.norm(out.vertices - np.array([c, c, c], dtype=np.float32), axis=1) - r)
    assert d.max() <= pos_tol + 0.5 * 2 ** -8 + 0.3   # plane tol + quantization + facet sagitta


def test_cluster_rejects_bad_tolerances():
    mesh = sphere_mesh()
    with pytest.raises(ValueError):
        cluster_vertices(mesh, angle_tol=0.0, pos_tol=1.0)


def test_tiny_angle_changes_nothing():
    mesh = sphere_mesh()
    out = cluster_vertices(mesh, angle_tol=1e-9, pos_tol=1e-9, levels=2)
    assert len(out.triangles) == len(mesh.triangles)


def test_fill_holes_on_closed_mesh_is_noop():
    mesh = sphere_mesh()
    n0 = len(mesh.triangles)
    mesh, report = fill_holes(mesh)
    assert report["filled"] == 0
    assert len(mesh.triangles) == n0


def test_fill_holes_closes_punched_sphere():
    mesh = sphere_mesh()
    # punch a hole: remove one vertex's triangles
    v0 = 10
    keep = ~(mesh.triangles == v0).any(axis=1)
    mesh.triangles = mesh.triangles[keep]
    mesh.tri_poly = mesh.tri_poly[keep]
    mesh.synthetic = mesh.synthetic[keep]
    a = audit_manifold(mesh)
    assert a["boundary"] > 0
    mesh, report = fill_holes(mesh)
    assert report["filled"] == 1
    a = audit_manifold(mesh)
    assert a["bad"] == 0 and a["boundary"] == 0 and a["winding_ok"]
    assert mesh.synthetic.any()


def test_min_area_dp_matches_bruteforce_hexagon():
    # planar hexagon: DP must reach the polygon area exactly with 4 triangles
    ang = np.linspace(0, 2 * np.pi, 7)[:-1]
    pts = np.stack([np.cos(ang), np.sin(ang), np.zeros(6)], axis=1)
    tris, area = _min_area_triangulation(pts, list(range(6)))
    assert len(tris) == 4
    hex_area = 6 * (np.sqrt(3) / 4)
    assert area == pytest.approx(hex_area, rel=1e-9)

    # brute-force oracle over all triangulations of a convex hexagon
    import itertools

    def all_triangulations(idx):
        if len(idx) < 3:
            return [[]]
        if len(idx) == 3:
            return [[tuple(idx)]]
        out = []
        a, b = idx[0], idx[-1]
        for m in idx[1:-1]:
            left = all_triangulations(idx[: idx.index(m) + 1])
            right = all_triangulations(idx[idx.index(m):])
            for l in left:
                for r in right:
                    out.append(l + r + [(a, m, b)])
        return out

    def total(tris):
        s = 0.0
        for i, j, k in tris:
            s += 0.5 * np.linalg.norm(np.cross(pts[j] - pts[i], pts[k] - pts[i]))
        return s

    best = min(total(t) for t in all_triangulations(list(range(6))))
    assert area == pytest.approx(best, rel=1e-9)


def test_boundary_loop_detection():
    mesh = plane_mesh()
    # slab mesh is closed (frame), so no loops
    assert boundary_loops(mesh) == []
