"""Command-line surface: psf, render, depth, vo, ate, pipeline, ablate.

Every subcommand writes a manifest.json (config snapshot, seed, input hashes)
next to its outputs.  Exit codes: 0 success, 2 validation error, 1 runtime
failure.  Config keys can be overridden with --section.key=value flags; the
CODEDCAM_CONFIG environment variable supplies a default config path.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .configio import parse_config
from .dataset import load_dataset
from .errors import CodedCamError, ConfigError, DatasetError
from .evaluate import AblationSpec, compute_ate, run_ablation
from .imgio import (
    load_trajectory,
    save_depth_png,
    save_psf_bank,
    save_rgb,
    save_trajectory,
    write_pfm,
)
from .pipeline import (
    build_bank,
    estimate_frames,
    load_scene_frames,
    render_frames,
    run_pipeline,
    write_manifest,
)
from .depth import compute_depth_metrics
from .vo import VoConfig, run_odometry

log = logging.getLogger(__name__)


def _split_overrides(argv):
    """Pull --section.key=value tokens out of argv before argparse sees them."""
    overrides, rest = {}, []
    for token in argv:
        if token.startswith("--") and "=" in token and "." in token.split("=")[0]:
            key, _, value = token[2:].partition("=")
            overrides[key] = value
        else:
            rest.append(token)
    return overrides, rest


def _load_config(args, overrides):
    path = args.config or os.environ.get("CODEDCAM_CONFIG")
    return parse_config(path, overrides)


def _write_metrics(out_dir: Path, metrics: dict) -> None:
    with open(out_dir / "metrics.json", "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out_dir / "metrics.txt", "w") as fh:
        for key in sorted(metrics):
            fh.write(f"{key}={metrics[key]}\n")


def cmd_psf(args, overrides):
    config = _load_config(args, overrides)
    bank = build_bank(config)
    out = Path(args.out)
    save_psf_bank(out, bank)
    write_manifest(out, "psf", config,
                   inputs=[args.config] if args.config else [],
                   outputs=[str(out / "index.txt")])
    print(f"wrote {len(bank.depth_bins) * 3} PSFs to {out}")
    return 0


def cmd_render(args, overrides):
    config = _load_config(args, overrides)
    dataset = load_dataset(args.dataset)
    bank = build_bank(config)
    frames = load_scene_frames(dataset)
    coded = render_frames(frames, bank, config)
    out = Path(args.out)
    (out / "coded").mkdir(parents=True, exist_ok=True)
    written = []
    for i, (entry, frame) in enumerate(zip(dataset.entries, coded)):
        path = out / "coded" / f"{i:06d}.png"
        save_rgb(path, frame.rgb)
        if args.float_maps:
            write_pfm(out / "coded" / f"{i:06d}.pfm", frame.rgb)
        written.append(str(path))
    with open(out / "coded" / "frames.txt", "w") as fh:
        for entry, path in zip(dataset.entries, written):
            fh.write(f"{entry[0]:.9g} {path}\n")
    write_manifest(out, "render", config,
                   inputs=[p for _, p, _ in dataset.entries],
                   outputs=written)
    print(f"rendered {len(written)} coded frames to {out / 'coded'}")
    return 0


def cmd_depth(args, overrides):
    config = _load_config(args, overrides)
    dataset = load_dataset(args.dataset)
    bank = build_bank(config)
    frames = load_scene_frames(dataset)
    coded = render_frames(frames, bank, config)
    estimates = estimate_frames(coded, bank, config)
    out = Path(args.out)
    (out / "depth").mkdir(parents=True, exist_ok=True)
    per_key = {}
    written = []
    for i, (frame, est) in enumerate(zip(frames, estimates)):
        path = out / "depth" / f"{i:06d}.png"
        save_depth_png(path, est.depth, dataset.depth_scale)
        write_pfm(out / "depth" / f"{i:06d}.pfm", est.depth)
        written.append(str(path))
        m = compute_depth_metrics(est.depth, frame.depth, max_depth=config.bins_far)
        for key, val in m.as_dict().items():
            per_key.setdefault(key, []).append(val)
    metrics = {k: float(np.nanmean(v)) for k, v in per_key.items()}
    _write_metrics(out, metrics)
    write_manifest(out, "depth", config, outputs=written)
    for key in sorted(metrics):
        print(f"{key}={metrics[key]:.6f}")
    return 0


def cmd_vo(args, overrides):
    config = _load_config(args, overrides)
    dataset = load_dataset(args.dataset)
    bank = build_bank(config)
    frames = load_scene_frames(dataset)
    coded = render_frames(frames, bank, config)
    estimates = estimate_frames(coded, bank, config)
    vo_config = VoConfig(**{**config.vo.__dict__, "seed": config.seed})
    traj = run_odometry(
        [(c.rgb, e.depth, c.timestamp) for c, e in zip(coded, estimates)],
        dataset.intrinsics, vo_config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_trajectory(out / "trajectory.txt", traj)
    write_manifest(out, "vo", config, outputs=[str(out / "trajectory.txt")])
    print(f"wrote {len(traj)} poses to {out / 'trajectory.txt'}")
    return 0


def cmd_ate(args, overrides):
    config = _load_config(args, overrides)
    est = load_trajectory(args.est)
    gt = load_trajectory(args.gt)
    ate = compute_ate(est, gt, max_dt=config.max_dt, with_scale=args.with_scale)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_metrics(out, {"ate": ate})
        write_manifest(out, "ate", config, inputs=[args.est, args.gt])
    print(f"{ate:.6f}")
    return 0


def cmd_pipeline(args, overrides):
    config = _load_config(args, overrides)
    dataset = load_dataset(args.dataset)
    result = run_pipeline(dataset, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_trajectory(out / "trajectory.txt", result["trajectory"])
    metrics = dict(result["depth_metrics"])
    metrics["ate"] = result["ate"]
    _write_metrics(out, metrics)
    write_manifest(out, "pipeline", config, outputs=[str(out / "trajectory.txt")])
    for key in sorted(metrics):
        print(f"{key}={metrics[key]:.6f}")
    return 0


def cmd_ablate(args, overrides):
    config = _load_config(args, overrides)
    dataset = load_dataset(args.dataset)
    values = [float(v) if args.axis == "focus_distance" else int(v)
              for v in args.values.split(",")]
    spec = AblationSpec(axis=args.axis, values=tuple(values))
    rows = run_ablation(spec, dataset, config, trials=config.trials)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ablation.json", "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
    columns = ["value", "abs_rel", "delta1", "rmse", "l1", "l1_under_3m", "ate", "error"]
    lines = ["  ".join(f"{c:>12s}" for c in columns)]
    for row in rows:
        cells = []
        for c in columns:
            v = row.get(c)
            cells.append(f"{v:12.6g}" if isinstance(v, (int, float)) else f"{str(v):>12s}")
        lines.append("  ".join(cells))
    table = "\n".join(lines)
    with open(out / "ablation.txt", "w") as fh:
        fh.write(table + "\n")
    write_manifest(out, "ablate", config, outputs=[str(out / "ablation.json")])
    print(table)
    return 1 if any(r["error"] for r in rows) else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codedcam",
        description="Coded-aperture simulation, depth from defocus, and visual odometry.")
    parser.add_argument("--config", help="key=value config file "
                        "(default: $CODEDCAM_CONFIG if set)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("psf", help="build and export a PSF bank")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_psf)

    p = sub.add_parser("render", help="render coded frames from an RGB-D dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--float-maps", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("depth", help="estimate depth maps and report metrics vs GT")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("vo", help="run odometry on coded frames + estimated depth")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_vo)

    p = sub.add_parser("ate", help="absolute trajectory error of est vs GT")
    p.add_argument("--est", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out")
    p.add_argument("--with-scale", action="store_true",
                   help="similarity (Sim3) alignment instead of SE(3)")
    p.set_defaults(func=cmd_ate)

    p = sub.add_parser("pipeline", help="render -> depth -> vo -> ate end to end")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("ablate", help="sweep mask size or focus distance")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--axis", required=True, choices=["mask_size", "focus_distance"])
    p.add_argument("--values", required=True, help="comma-separated sweep values")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    overrides, rest = _split_overrides(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(rest)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args, overrides)
    except (ConfigError, DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CodedCamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
