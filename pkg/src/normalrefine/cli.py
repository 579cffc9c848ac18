"""Command-line entry point: one pipeline run per invocation."""

from __future__ import annotations

import argparse
import math
import sys

from .backends import CP2TV, MEAN, MEDIAN, THREE_F2N, BackendChoice
from .initializer import PD, TV
from .pipeline import PipelineConfig, PipelineError, run_pipeline


def _iters(text):
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer or 'inf', got {text!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError("iteration cap must be >= 0")
    return n


def _u64(text):
    try:
        n = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= n < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return n


def _nonneg_float(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (x >= 0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError("must be finite and >= 0")
    return x


def _nonneg_int(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return n


def build_parser():
    p = argparse.ArgumentParser(
        prog="normalrefine",
        description="Estimate surface normals from a depth image with discontinuity-aware gradients.",
    )
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scene", help="synthetic scene, e.g. step-edge or 'ridge:slope=1.2,angle=20'")
    src.add_argument("--depth", help="depth image (.pfm or 16-bit .png)")
    p.add_argument("--intrinsics", help="text file with 'fu fv cu cv' (required with --depth)")
    p.add_argument("--gt", help="ground-truth normal PFM for --depth input (enables metrics)")
    p.add_argument("--png-scale", type=float, default=0.001, help="metres per raw unit for PNG depth")
    p.add_argument("--backend", choices=(THREE_F2N, CP2TV), default=CP2TV)
    p.add_argument("--phi", choices=(MEDIAN, MEAN), default=MEDIAN, help="n_z filter for 3f2n")
    p.add_argument("--iters", type=_iters, default=3, help="DP sweep cap, or 'inf'")
    p.add_argument("--cost", choices=(PD, TV), default=PD)
    p.add_argument("--sigma", type=_nonneg_float, default=0.0, help="Gaussian noise variance")
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--band", type=_nonneg_int, default=2, help="discontinuity band radius in pixels")
    p.add_argument("--out", help="directory for normals PFM/PNG, report and figure")
    p.add_argument("--csv", help="CSV report to append one row to")
    p.add_argument("--no-figure", action="store_true", help="skip the matplotlib figure")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.depth and not args.intrinsics:
        parser.error("--depth requires --intrinsics")
    if args.scene and (args.intrinsics or args.gt):
        parser.error("--intrinsics/--gt only apply to --depth input")
    try:
        cfg = PipelineConfig(
            scene=args.scene, depth_path=args.depth, intrinsics_path=args.intrinsics,
            gt_path=args.gt, png_scale=args.png_scale,
            backend=BackendChoice(args.backend, args.phi), cost_kind=args.cost,
            iterations=args.iters, sigma=args.sigma, seed=args.seed, band_radius=args.band,
            out_dir=args.out, csv_path=args.csv, figure=not args.no_figure,
        )
    except ValueError as exc:
        print(f"error: [config] {exc}", file=sys.stderr)
        return 2
    try:
        res = run_pipeline(cfg)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    row = res.row
    parts = [f"scene={row['scene']}", f"backend={row['backend']}", f"sweeps={row['sweeps']}",
             f"runtime_ms={row['runtime_ms']:.1f}"]
    if res.report is not None:
        parts.append(f"aae_full={row['aae_full']:.4f}")
        if res.band_report is not None:
            parts.append(f"aae_band={row['aae_band']:.4f}")
        parts.append(f"car={row['car']:.4f}")
    print(" ".join(parts))
    return 0


if __name__ == "__main__":
    sys.exit(main())
