"""End-to-end pipeline: volume in, EXA containers, meshes, and exports out.

Stages follow the processing chain: preprocess (low-pass + 2:1 resample,
noise/threshold estimation, joint bilateral denoising), extract (sign field
to EXA), mesh (decode + dual marching cubes), features (normal smoothing,
vertex relaxation, curvature, segmentation, deltas, ambient occlusion, two
more EXA exports), export (PLY/OBJ/STL/bundle). Every artifact is
byte-deterministic for a given config and seed; worker counts only affect
timing.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import analyze, denoise
from .ao import compute_ambient_occlusion, quantize_ao
from .contour import extract_contour
from .curvature import classify_shape, estimate_curvatures
from .deltas import bits_per_vertex, encode_vertex_deltas
from .exa import ExaContainer, encode_contour, exa_decode, exa_write
from .export import export_mesh
from .features import VertexAttributes, pack_ao, pack_features
from .mesh import audit_manifold, build_mesh, compute_normals, triangulate
from .mesh_ops import cluster_vertices, fill_holes
from .phantom import PhantomSpec, generate_phantom
from .segmentation import partition_sizes, segment_mesh
from .smoothing import smooth_face_normals, update_vertex_positions
from .volume import Volume3D, crop_volume, gauss_resample, import_volume

ALL_STAGES = ("preprocess", "extract", "mesh", "features", "export")


@dataclass
class PipelineConfig:
    input_path: str | None = None
    input_format: str = "raw3d"
    hdf5_dataset: str = "volume"
    phantom: PhantomSpec | None = None
    out_dir: str = "out"
    stages: tuple = ALL_STAGES
    crop: tuple | None = None            # ((ox,oy,oz), (nx,ny,nz))
    resample: bool = True
    bins: int = 1024
    f_factor: float = 2.0
    tau: float | None = None             # None: estimate automatically
    precision: int = 8
    denoise_iterations: int = 2
    range_fn: str = "tukey"
    smooth_iters: int = 32
    vertex_iters: int = 8
    k1_threshold: float = -0.5
    c_min: float = 2.0 ** -6
    ao_rays: int = 160
    ao_radius: float = 64.0
    cluster: tuple | None = None         # (angle_tol_deg, pos_tol)
    fill_holes: bool = False
    exports: tuple = ()
    threads: int | None = None
    seed: int = 0
    emphasis_mode: str = "blueorange"

    @classmethod
    def preset_tablet(cls, **kw):
        kw.setdefault("precision", 4)
        return cls(**kw)


class PipelineError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


class _Report:
    def __init__(self):
        self.rows = []

    def add(self, stage, seconds, **details):
        self.rows.append({"stage": stage, "seconds": round(seconds, 4), **details})

    def to_json(self, **extra):
        return json.dumps({"stages": self.rows, **extra}, indent=1, sort_keys=True)


def _timed(report, stage_name):
    class _Ctx:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, et, ev, tb):
            self.seconds = time.perf_counter() - self.t0
            return False
    return _Ctx()


def run_pipeline(cfg: PipelineConfig):
    """Execute the configured stages; returns (report_dict, artifacts_dict)."""
    if cfg.threads:
        import numba
        numba.set_num_threads(max(1, int(cfg.threads)))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = _Report()
    artifacts = {}
    stages = set(cfg.stages if "all" not in cfg.stages else ALL_STAGES)

    def need(s):
        return s in stages

    vol = None
    tau = cfg.tau
    stage = "import"
    try:
        t0 = time.perf_counter()
        if cfg.phantom is not None:
            vol = generate_phantom(cfg.phantom)
            src = f"phantom:{cfg.phantom.kind}"
        elif cfg.input_path:
            vol = import_volume(cfg.input_path, cfg.input_format, cfg.hdf5_dataset)
            src = str(cfg.input_path)
        else:
            raise ValueError("no input volume or phantom configured")
        report.add("import", time.perf_counter() - t0, source=src, dims=list(vol.dims))

        if cfg.crop is not None:
            t0 = time.perf_counter()
            vol = crop_volume(vol, *cfg.crop)
            report.add("crop", time.perf_counter() - t0, dims=list(vol.dims))

        if need("preprocess"):
            stage = "preprocess"
            snr_track = []
            hist = None

            def try_hist(v):
                try:
                    return analyze.build_histogram(v, cfg.bins)
                except analyze.HistogramError:
                    return None

            hist = try_hist(vol)
            if hist:
                snr_track.append(round(analyze.estimate_snr(hist), 2))
            if cfg.resample:
                t0 = time.perf_counter()
                vol = gauss_resample(vol)
                hist = try_hist(vol)
                if hist:
                    snr_track.append(round(analyze.estimate_snr(hist), 2))
                report.add("lowpass_resample", time.perf_counter() - t0,
                           dims=list(vol.dims), snr_db=snr_track[-2:])
            if cfg.denoise_iterations > 0 and hist:
                t0 = time.perf_counter()
                vol = denoise.denoise_joint_bilateral(vol, hist.sigma,
                                                      cfg.denoise_iterations, cfg.range_fn)
                hist = try_hist(vol)
                if hist:
                    snr_track.append(round(analyze.estimate_snr(hist), 2))
                report.add("denoise", time.perf_counter() - t0,
                           iterations=cfg.denoise_iterations, range_fn=cfg.range_fn,
                           snr_db=snr_track)
            if tau is None:
                t0 = time.perf_counter()
                if hist is None:
                    raise ValueError("histogram is not bimodal; pass tau explicitly")
                tau = analyze.estimate_threshold(hist, cfg.f_factor)
                report.add("estimate_threshold", time.perf_counter() - t0,
                           tau=float(tau), sigma=hist.sigma)
        if tau is None:
            hist = analyze.build_histogram(vol, cfg.bins)
            tau = analyze.estimate_threshold(hist, cfg.f_factor)

        contour = None
        container = None
        if need("extract"):
            stage = "extract"
            t0 = time.perf_counter()
            contour = extract_contour(vol, float(tau), cfg.precision)
            report.add("extract", time.perf_counter() - t0,
                       tau=float(tau), active_edges=int(contour.n_active_edges),
                       active_cells=int(contour.n_active_cells))
            t0 = time.perf_counter()
            container = encode_contour(contour)
            path1 = out / "contour.exa"
            exa_write(path1, container)
            artifacts["exa_contour"] = str(path1)
            nv = contour.n_active_edges + 2
            report.add("export_exa", time.perf_counter() - t0, file=str(path1),
                       bytes=path1.stat().st_size,
                       topo_bits_per_vertex=round(container.section_bits("TOPO") / nv, 4),
                       prec_bits_per_vertex=round(container.section_bits("PREC") / nv, 4))

        mesh = None
        if need("mesh"):
            stage = "mesh"
            t0 = time.perf_counter()
            decoded = exa_decode(container) if container else extract_contour(vol, float(tau), cfg.precision)
            mesh = compute_normals(triangulate(build_mesh(decoded)))
            contour = decoded
            report.add("mesh", time.perf_counter() - t0,
                       vertices=int(mesh.n_vertices), xquads=int(mesh.n_xquads),
                       triangles=int(len(mesh.triangles)))

        attrs = None
        if need("features") and mesh is not None:
            stage = "features"
            import copy
            initial = copy.deepcopy(mesh)
            t0 = time.perf_counter()
            smooth_face_normals(mesh, cfg.smooth_iters)
            report.add("smooth_normals", time.perf_counter() - t0, iterations=cfg.smooth_iters)
            t0 = time.perf_counter()
            update_vertex_positions(mesh, cfg.vertex_iters)
            report.add("update_vertices", time.perf_counter() - t0, iterations=cfg.vertex_iters)
            if cfg.cluster is not None:
                t0 = time.perf_counter()
                mesh = cluster_vertices(mesh, cfg.cluster[0], cfg.cluster[1])
                report.add("cluster", time.perf_counter() - t0,
                           triangles=int(len(mesh.triangles)))
            if cfg.fill_holes:
                t0 = time.perf_counter()
                mesh, rep = fill_holes(mesh)
                report.add("fill_holes", time.perf_counter() - t0, **rep)
            t0 = time.perf_counter()
            curv = estimate_curvatures(mesh)
            shape = classify_shape(curv[:, 0], curv[:, 1], cfg.c_min)
            report.add("curvature", time.perf_counter() - t0)
            t0 = time.perf_counter()
            labels = segment_mesh(mesh, curv, cfg.k1_threshold)
            report.add("segmentation", time.perf_counter() - t0,
                       k1_threshold=cfg.k1_threshold,
                       partitions=partition_sizes(labels))
            attrs = VertexAttributes(shape_code=shape, partition=labels,
                                     ao=np.zeros(mesh.n_vertices, dtype=np.uint8))
            if container is not None and initial.n_vertices == mesh.n_vertices:
                t0 = time.perf_counter()
                dpos, dnrm = encode_vertex_deltas(initial, mesh)
                container.sections["DPOS"] = dpos
                container.sections["DNRM"] = dnrm
                container.sections["FEAT"] = pack_features(attrs)
                path2 = out / "surface.exa"
                exa_write(path2, container)
                artifacts["exa_surface"] = str(path2)
                report.add("export_exa_surface", time.perf_counter() - t0,
                           file=str(path2), bytes=path2.stat().st_size,
                           dpos_bits_per_vertex=round(bits_per_vertex(dpos, mesh.n_vertices), 2),
                           dnrm_bits_per_vertex=round(bits_per_vertex(dnrm, mesh.n_vertices), 2),
                           feat_bits_per_vertex=round(
                               bits_per_vertex(container.sections["FEAT"], mesh.n_vertices), 2))
            t0 = time.perf_counter()
            ao = compute_ambient_occlusion(mesh, contour, cfg.ao_rays, cfg.ao_radius)
            attrs.ao = quantize_ao(ao)
            report.add("ambient_occlusion", time.perf_counter() - t0,
                       rays=cfg.ao_rays, radius=cfg.ao_radius,
                       mean_openness=round(float(ao.mean()), 4))
            if container is not None and "FEAT" in container.sections:
                t0 = time.perf_counter()
                container.sections["FEAT"] = pack_features(attrs)
                container.sections["AOCC"] = pack_ao(attrs.ao)
                path3 = out / "final.exa"
                exa_write(path3, container)
                artifacts["exa_final"] = str(path3)
                report.add("export_exa_final", time.perf_counter() - t0,
                           file=str(path3), bytes=path3.stat().st_size)

        if need("export") and mesh is not None:
            stage = "export"
            if attrs is None:
                attrs = VertexAttributes(
                    shape_code=np.zeros(mesh.n_vertices, dtype=np.uint8),
                    partition=np.zeros(mesh.n_vertices, dtype=np.uint8),
                    ao=np.full(mesh.n_vertices, 63, dtype=np.uint8))
            for fmt in cfg.exports:
                t0 = time.perf_counter()
                if fmt == "bundle":
                    path = out / "bundle"
                else:
                    path = out / f"mesh.{fmt}"
                export_mesh(mesh, attrs, fmt, path, mode=cfg.emphasis_mode)
                artifacts[fmt] = str(path)
                report.add(f"export_{fmt}", time.perf_counter() - t0, file=str(path))

        audit = audit_manifold(mesh, allow_boundary=True) if mesh is not None else None
    except Exception as e:          # keep partial artifacts, name the stage
        raise PipelineError(stage, e) from e

    report_dict = {"stages": report.rows, "artifacts": artifacts,
                   "audit": audit, "tau": float(tau) if tau is not None else None}
    report_path = out / "report.json"
    report_path.write_text(json.dumps(report_dict, indent=1, sort_keys=True))
    artifacts["report"] = str(report_path)
    return report_dict, artifacts


def report_stats(path) -> dict:
    """Inspect an EXA file or a bundle directory."""
    path = Path(path)
    if path.is_dir() or path.name == "manifest.json":
        mdir = path if path.is_dir() else path.parent
        manifest = json.loads((mdir / "manifest.json").read_text())
        return {
            "kind": "bundle",
            "vertices": manifest["vertex_count"],
            "triangles": manifest["triangle_count"],
            "partitions": manifest["partitions"],
            "bytes": sum((mdir / b).stat().st_size for b in manifest["buffers"]),
        }
    from .exa import exa_read

    container = exa_read(path)
    decoded = exa_decode(container)
    nv = decoded.n_active_edges + 2          # dual-vertex scale for closed quads
    stats = {"kind": "exa", "dims": list(container.dims), "tau": container.tau,
             "precision": container.precision, "vertices_estimate": int(nv),
             "bytes": path.stat().st_size, "sections": {}}
    for tag, data in container.sections.items():
        stats["sections"][tag] = {"bytes": len(data),
                                  "bits_per_vertex": round(8 * len(data) / nv, 4)}
    return stats
