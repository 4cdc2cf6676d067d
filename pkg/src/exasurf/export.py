"""Mesh interchange: binary PLY, OBJ, binary STL, and the viewer bundle.

The bundle is a manifest.json plus raw little-endian buffers (positions.f32,
normals.f32, indices.u32, features.u16) with triangles sorted by partition so
the viewer can draw each partition as one index range.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .emphasis import bake_vertex_colors
from .features import VertexAttributes, pack_features
from .mesh import XQuadMesh, edge_incidence
from .segmentation import triangle_partitions


class ExportError(ValueError):
    pass


def _require(mesh: XQuadMesh):
    if mesh.triangles is None or mesh.vertex_normals is None:
        raise ExportError("mesh needs triangles and normals before export")


def write_ply(path, mesh: XQuadMesh, attrs: VertexAttributes | None = None,
              mode: str = "blueorange") -> None:
    """Binary little-endian PLY with positions, normals, baked colors, and
    the partition label as an integer property."""
    _require(mesh)
    V = mesh.n_vertices
    T = len(mesh.triangles)
    if attrs is not None:
        colors = bake_vertex_colors(attrs.shape_code, attrs.ao, mode)
        parts = attrs.partition
    else:
        colors = np.full((V, 3), 200, dtype=np.uint8)
        parts = np.zeros(V, dtype=np.uint8)
    header = "\n".join([
        "ply",
        "format binary_little_endian 1.0",
        f"element vertex {V}",
        "property float x", "property float y", "property float z",
        "property float nx", "property float ny", "property float nz",
        "property uchar red", "property uchar green", "property uchar blue",
        "property uchar partition",
        f"element face {T}",
        "property list uchar int vertex_indices",
        "end_header",
    ]) + "\n"
    vtype = np.dtype([("p", "<f4", 3), ("n", "<f4", 3), ("rgb", "u1", 3), ("part", "u1")])
    vdata = np.empty(V, dtype=vtype)
    vdata["p"] = mesh.vertices
    vdata["n"] = mesh.vertex_normals
    vdata["rgb"] = colors
    vdata["part"] = parts
    ftype = np.dtype([("k", "u1"), ("idx", "<i4", 3)])
    fdata = np.empty(T, dtype=ftype)
    fdata["k"] = 3
    fdata["idx"] = mesh.triangles
    with open(path, "wb") as f:
        f.write(header.encode())
        f.write(vdata.tobytes())
        f.write(fdata.tobytes())


def read_ply(path):
    """Minimal reader for the files written above (round-trip testing)."""
    blob = Path(path).read_bytes()
    end = blob.index(b"end_header\n") + len(b"end_header\n")
    header = blob[:end].decode().splitlines()
    nv = nt = 0
    for line in header:
        if line.startswith("element vertex"):
            nv = int(line.split()[-1])
        elif line.startswith("element face"):
            nt = int(line.split()[-1])
    vtype = np.dtype([("p", "<f4", 3), ("n", "<f4", 3), ("rgb", "u1", 3), ("part", "u1")])
    vdata = np.frombuffer(blob, dtype=vtype, count=nv, offset=end)
    ftype = np.dtype([("k", "u1"), ("idx", "<i4", 3)])
    fdata = np.frombuffer(blob, dtype=ftype, count=nt, offset=end + nv * vtype.itemsize)
    return (vdata["p"].copy(), vdata["n"].copy(), vdata["rgb"].copy(),
            vdata["part"].copy(), fdata["idx"].copy())


def write_obj(path, mesh: XQuadMesh) -> None:
    _require(mesh)
    with open(path, "w") as f:
        f.write("# exasurf mesh\n")
        for p in mesh.vertices:
            f.write(f"v {p[0]:.6f} {p[1]:.6f} {p[2]:.6f}\n")
        for n in mesh.vertex_normals:
            f.write(f"vn {n[0]:.6f} {n[1]:.6f} {n[2]:.6f}\n")
        for t in mesh.triangles + 1:
            f.write(f"f {t[0]}//{t[0]} {t[1]}//{t[1]} {t[2]}//{t[2]}\n")


def write_stl(path, mesh: XQuadMesh, triangles: np.ndarray | None = None,
              check_watertight: bool = True) -> None:
    """Binary STL (80-byte header + count + 50 bytes per triangle)."""
    _require(mesh)
    tris = mesh.triangles if triangles is None else triangles
    if check_watertight and len(tris):
        sub = XQuadMesh(vertices=mesh.vertices, vert_cell=mesh.vert_cell,
                        vert_face=mesh.vert_face, polys=mesh.polys,
                        poly_len=mesh.poly_len, poly_edge=mesh.poly_edge,
                        quad_slots=mesh.quad_slots)
        sub.triangles = tris
        _, counts, _ = edge_incidence(sub)
        if (counts != 2).any():
            raise ExportError("STL needs a watertight selection; fill holes first")
    v = mesh.vertices.astype(np.float64)
    n = np.cross(v[tris[:, 1]] - v[tris[:, 0]], v[tris[:, 2]] - v[tris[:, 0]])
    ln = np.linalg.norm(n, axis=1, keepdims=True)
    ln[ln < 1e-20] = 1
    n = n / ln
    rec = np.zeros(len(tris), dtype=np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)),
                                              ("attr", "<u2")]))
    rec["n"] = n
    rec["v"] = v[tris]
    with open(path, "wb") as f:
        f.write(b"exasurf binary stl".ljust(80, b"\x00"))
        f.write(struct.pack("<I", len(tris)))
        f.write(rec.tobytes())


def write_bundle(outdir, mesh: XQuadMesh, attrs: VertexAttributes) -> Path:
    """Viewer bundle: manifest.json + raw buffers, triangles sorted by partition."""
    _require(mesh)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    tri_part = triangle_partitions(mesh, attrs.partition)
    order = np.argsort(tri_part, kind="stable")
    tris = mesh.triangles[order]
    tri_part = tri_part[order]
    ids, starts, counts = np.unique(tri_part, return_index=True, return_counts=True)
    partitions = [{"label": int(i), "tri_offset": int(s), "tri_count": int(c)}
                  for i, s, c in zip(ids, starts, counts)]
    lo = mesh.vertices.min(axis=0).tolist() if mesh.n_vertices else [0, 0, 0]
    hi = mesh.vertices.max(axis=0).tolist() if mesh.n_vertices else [0, 0, 0]
    manifest = {
        "format": "exasurf-bundle",
        "version": 1,
        "vertex_count": int(mesh.n_vertices),
        "triangle_count": int(len(tris)),
        "partitions": partitions,
        "bounds": {"min": lo, "max": hi},
        "attribute_legend": {
            "features.u16": "bits 15..9 shape code (0 flat), 8..6 partition, 5..0 ambient openness",
        },
        "buffers": {
            "positions.f32": 3 * int(mesh.n_vertices),
            "normals.f32": 3 * int(mesh.n_vertices),
            "indices.u32": 3 * int(len(tris)),
            "features.u16": int(mesh.n_vertices),
        },
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))
    mesh.vertices.astype("<f4").tofile(outdir / "positions.f32")
    mesh.vertex_normals.astype("<f4").tofile(outdir / "normals.f32")
    tris.astype("<u4").tofile(outdir / "indices.u32")
    (outdir / "features.u16").write_bytes(pack_features(attrs))
    return outdir / "manifest.json"


def export_mesh(mesh: XQuadMesh, attrs: VertexAttributes | None, format: str, path,
                partitions: list | None = None, mode: str = "blueorange") -> None:
    """Dispatch to one of ply / obj / stl / bundle."""
    if format == "ply":
        write_ply(path, mesh, attrs, mode)
    elif format == "obj":
        write_obj(path, mesh)
    elif format == "stl":
        tris = None
        if partitions is not None and attrs is not None:
            tp = triangle_partitions(mesh, attrs.partition)
            tris = mesh.triangles[np.isin(tp, partitions)]
        write_stl(path, mesh, tris)
    elif format == "bundle":
        if attrs is None:
            raise ExportError("bundle export needs vertex attributes")
        write_bundle(path, mesh, attrs)
    else:
        raise ExportError(f"unknown format {format!r}")
