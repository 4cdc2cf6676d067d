"""Command line: run the pipeline, generate phantoms, inspect artifacts."""

from __future__ import annotations

import argparse
import json
import sys

from .phantom import PhantomSpec
from .pipeline import ALL_STAGES, PipelineConfig, PipelineError, report_stats, run_pipeline


def _parse_crop(text):
    offs, dims = text.split(":")
    return tuple(int(v) for v in offs.split(",")), tuple(int(v) for v in dims.split(","))


def build_parser():
    ap = argparse.ArgumentParser(prog="exasurf",
                                 description="volume to attributed-surface pipeline")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the processing pipeline")
    run.add_argument("--in", dest="input_path", help="input volume path")
    run.add_argument("--format", choices=("raw3d", "hdf5"), default="raw3d")
    run.add_argument("--hdf5-dataset", default="volume")
    run.add_argument("--phantom", choices=("sphere", "nested-box", "bimodal-noise"))
    run.add_argument("--phantom-dims", default="64,64,64")
    run.add_argument("--phantom-noise", type=float, default=0.0)
    run.add_argument("--phantom-bridge", action="store_true")
    run.add_argument("--out", default="out")
    run.add_argument("--stages", default="all",
                     help="comma list from: " + ",".join(ALL_STAGES) + ",all")
    run.add_argument("--crop", type=_parse_crop, help="x,y,z:nx,ny,nz")
    run.add_argument("--no-resample", action="store_true")
    run.add_argument("--bins", type=int, default=1024)
    run.add_argument("--f", dest="f_factor", type=float, default=2.0)
    run.add_argument("--tau", default="auto")
    run.add_argument("--precision", type=int, default=8)
    run.add_argument("--preset", choices=("tablet",))
    run.add_argument("--denoise-iters", type=int, default=2)
    run.add_argument("--range-fn", choices=("tukey", "gauss"), default="tukey")
    run.add_argument("--smooth-iters", type=int, default=32)
    run.add_argument("--vertex-iters", type=int, default=8)
    run.add_argument("--k1-thresh", type=float, default=-0.5)
    run.add_argument("--ao-rays", type=int, default=160)
    run.add_argument("--ao-radius", type=float, default=64.0)
    run.add_argument("--cluster", help="angle_deg,pos_tol")
    run.add_argument("--fill-holes", action="store_true")
    run.add_argument("--export", default="", help="comma list: ply,obj,stl,bundle")
    run.add_argument("--threads", type=int)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--config", help="JSON config file; flags win over file values")

    stats = sub.add_parser("stats", help="inspect an EXA file or bundle")
    stats.add_argument("artifact")

    return ap


def config_from_args(args) -> PipelineConfig:
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = json.loads(open(args.config).read())

    def pick(flag, default):
        v = getattr(args, flag, None)
        if v is not None and v is not False and v != default:
            return v
        return file_cfg.get(flag, v if v is not None else default)

    phantom = None
    if args.phantom:
        dims = tuple(int(v) for v in args.phantom_dims.split(","))
        phantom = PhantomSpec(args.phantom, dims, noise=args.phantom_noise,
                              seed=args.seed, bridge=args.phantom_bridge)
    tau = None if args.tau == "auto" else float(args.tau)
    stages = tuple(args.stages.split(",")) if args.stages else ("all",)
    precision = 4 if args.preset == "tablet" and args.precision == 8 else args.precision
    cluster = None
    if args.cluster:
        a, p = args.cluster.split(",")
        cluster = (float(a), float(p))
    exports = tuple(e for e in args.export.split(",") if e)
    return PipelineConfig(
        input_path=args.input_path, input_format=args.format,
        hdf5_dataset=args.hdf5_dataset, phantom=phantom, out_dir=args.out,
        stages=stages, crop=args.crop, resample=not args.no_resample,
        bins=pick("bins", 1024), f_factor=pick("f_factor", 2.0), tau=tau,
        precision=precision, denoise_iterations=args.denoise_iters,
        range_fn=args.range_fn, smooth_iters=pick("smooth_iters", 32),
        vertex_iters=pick("vertex_iters", 8), k1_threshold=pick("k1_thresh", -0.5),
        ao_rays=pick("ao_rays", 160), ao_radius=pick("ao_radius", 64.0),
        cluster=cluster, fill_holes=args.fill_holes, exports=exports,
        threads=args.threads, seed=args.seed)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "stats":
        print(json.dumps(report_stats(args.artifact), indent=1, sort_keys=True))
        return 0
    cfg = config_from_args(args)
    try:
        report, artifacts = run_pipeline(cfg)
    except PipelineError as e:
        print(json.dumps({"error": str(e), "stage": e.stage}), file=sys.stderr)
        return 1
    print(json.dumps(report, indent=1, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
