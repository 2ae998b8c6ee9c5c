"""Command-line entry point: ``scalesplat <command> [flags]``.

Exit codes: 0 success, 2 bad input (named cause on stderr), 1 internal failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from fractions import Fraction
from pathlib import Path

from .core import BlendMode, CameraModel, FilterMode, GaussianCloud, RenderSettings, TrainingCameraSet
from .errorlab import ErrorGridSpec, run_sweep
from .errors import MissingTrainingCamerasError, SplatError, TooSmallError
from .io import box_downsample, capped, load_manifest, load_ply, psnr, read_png, ssim, write_png, write_ply
from .io.cameras import CameraManifest, save_manifest
from .rasterizer import render, render_frame
from .synth import RECIPES, SceneRecipe, build


class UsageError(SplatError):
    """Flag combination rejected before any work starts."""


def _load_scene(args) -> tuple[GaussianCloud, CameraModel, TrainingCameraSet | None]:
    """Cloud, base render camera and training cameras for render-like commands."""
    if args.recipe is not None:
        cloud, train = build(SceneRecipe.named(args.recipe, seed=args.seed))
        cam = train.cameras[0]
        if args.cameras is not None:
            manifest = load_manifest(args.cameras)
            cam = manifest.view(args.view)
            train = manifest.training or train
        return cloud, cam, train
    if args.cameras is None:
        wanted = [getattr(args, "filter", "")] + getattr(args, "filters", "").split(",")
        if "sa" in (w.strip() for w in wanted):
            raise MissingTrainingCamerasError("--filter sa needs --cameras with training cameras")
        raise UsageError("--ply needs --cameras to define the view")
    manifest = load_manifest(args.cameras)
    cloud = load_ply(args.ply)
    return cloud, manifest.view(args.view), manifest.training


def _settings(filter_mode: str, blend_mode: str, args) -> RenderSettings:
    return RenderSettings(filter_mode=FilterMode(filter_mode), blend_mode=BlendMode(blend_mode),
                          ss_grid=args.ss_grid, sigma_l=args.sigma_l)


def cmd_render(args) -> int:
    if args.scale <= 0:
        raise UsageError("--scale must be positive")
    cloud, cam, train = _load_scene(args)
    if args.filter == "sa" and train is None:
        raise MissingTrainingCamerasError("--filter sa needs training cameras in the manifest")
    img, stats = render_frame(cloud, cam.scaled(args.scale), train, _settings(args.filter, args.blend, args),
                              workers=args.threads)
    write_png(img, args.out)
    print(f"splats={stats.splats} culled={stats.culled} seconds={stats.seconds:.3f} "
          f"size={img.width}x{img.height} out={args.out}")
    return 0


def _parse_list(text: str, kind=str):
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise UsageError(f"empty list {text!r}")
    return [kind(t) for t in items]


def _safe_ssim(a, b) -> float:
    try:
        return ssim(a, b)
    except TooSmallError:
        return math.nan


def cmd_zoom_sweep(args) -> int:
    scales = _parse_list(args.scales, float)
    filters = [FilterMode(f).value for f in _parse_list(args.filters)]
    blends = [BlendMode(b).value for b in _parse_list(args.blends)]
    if any(s <= 0 for s in scales):
        raise UsageError("scales must be positive")
    for s in scales:
        if s < 1 and Fraction(1 / s).limit_denominator(1000).denominator != 1:
            raise UsageError(f"zoom-out scale {s} must be 1/k for an integer k")
    cloud, cam, train = _load_scene(args)
    if train is None and (("sa" in filters) or any(s > 1 for s in scales)):
        raise MissingTrainingCamerasError("scale-adaptive rendering needs training cameras")
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    base = None
    rows = []
    for s in scales:
        target = cam.scaled(s)
        if s <= 1:
            if base is None:
                base = render(cloud, cam, train, _settings("dilate", "point", args), args.threads)
            k = int(round(1 / s))
            ref = box_downsample(base, k)
            ref_name = "box-downsampled dilate+point 1x"
        else:
            ref = render(cloud, target, train, _settings("sa", "ss", args), args.threads)
            ref_name = "sa+ss at target scale"
        write_png(ref, out / "images" / f"ref_s{s:g}.png")
        for f in filters:
            for b in blends:
                if f == "sa" and train is None:
                    continue
                img = render(cloud, target, train, _settings(f, b, args), args.threads)
                name = f"s{s:g}_{f}_{b}.png"
                write_png(img, out / "images" / name)
                rows.append({"scale": f"{s:g}", "filter": f, "blend": b,
                             "psnr_db": f"{capped(psnr(img, ref)):.4f}",
                             "ssim": f"{_safe_ssim(img, ref):.6f}",
                             "width": img.width, "height": img.height,
                             "reference": ref_name, "image": f"images/{name}"})
    with (out / "zoom_sweep.csv").open("w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["scale"])
        wr.writeheader()
        wr.writerows(rows)
    for r in rows:
        print(f"scale={r['scale']} filter={r['filter']} blend={r['blend']} "
              f"psnr={r['psnr_db']} ssim={r['ssim']}")
    return 0


def cmd_err_grid(args) -> int:
    if args.oracle_samples < 2 or args.theta_count < 1:
        raise UsageError("--oracle-samples must be >= 2 and --theta-count >= 1")
    spec = ErrorGridSpec(theta_count=args.theta_count, oracle_samples=args.oracle_samples)
    report = run_sweep(spec, with_bounds=not args.no_bounds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "err_grid.csv")
    if not args.no_heatmaps:
        report.write_heatmaps(out / "heatmaps")
    line = f"mean_rel_err={report.mean_rel_err:.6%} cells={report.rel_err.size}"
    if not args.no_bounds:
        line += f" sandwich={report.sandwich_holds.mean():.4%}"
    print(line)
    return 0


def cmd_compare(args) -> int:
    a, b = read_png(args.a), read_png(args.b)
    print(f"psnr_db={capped(psnr(a, b)):.4f} ssim={_safe_ssim(a, b):.6f}")
    return 0


def cmd_synth_make(args) -> int:
    cloud, train = build(SceneRecipe.named(args.recipe, seed=args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ply(cloud, out / "scene.ply")
    ids = [f"train-{i}" for i in range(len(train))]
    save_manifest(CameraManifest(train, ids, {"front": train.cameras[0]}), out / "cameras.json")
    print(f"gaussians={len(cloud)} cameras={len(train)} out={out}")
    return 0


def _add_scene_flags(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--ply", type=Path, help="3DGS checkpoint")
    src.add_argument("--recipe", choices=sorted(RECIPES), help="procedural scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cameras", type=Path, help="JSON camera manifest")
    p.add_argument("--view", help="camera id in the manifest")
    p.add_argument("--ss-grid", type=int, default=3)
    p.add_argument("--sigma-l", type=float, default=0.3)
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scalesplat", description="Scale-adaptive Gaussian splat renderer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render one view to PNG")
    _add_scene_flags(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--filter", choices=[m.value for m in FilterMode], default="sa")
    p.add_argument("--blend", choices=[m.value for m in BlendMode], default="point")
    p.add_argument("--scale", type=float, default=1.0, help="resolution multiplier")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("zoom-sweep", help="PSNR/SSIM across scales and pipelines")
    _add_scene_flags(p)
    p.add_argument("--scales", default="1,0.5,0.25,0.125")
    p.add_argument("--filters", default="none,dilate,sa")
    p.add_argument("--blends", default="point,ss,int")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_zoom_sweep)

    p = sub.add_parser("err-grid", help="integration error sweep")
    p.add_argument("--oracle-samples", type=int, default=512)
    p.add_argument("--theta-count", type=int, default=6)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--no-heatmaps", action="store_true")
    p.add_argument("--no-bounds", action="store_true")
    p.set_defaults(func=cmd_err_grid)

    p = sub.add_parser("compare", help="PSNR/SSIM between two PNGs")
    p.add_argument("--a", type=Path, required=True)
    p.add_argument("--b", type=Path, required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth-make", help="write a procedural scene as PLY + manifest")
    p.add_argument("--recipe", choices=sorted(RECIPES), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth_make)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1 or getattr(args, "ss_grid", 1) < 1:
        print("error: UsageError: --threads and --ss-grid must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (SplatError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
