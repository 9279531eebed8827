"""Command line: synth, track, joint and eval subcommands."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .config import Config, ConfigError, load_config
from .evaluation import clear_mot, seg_report
from .flow import flow_filename, read_flow
from .pipeline import MODES, run_pipeline
from .scene import Frame
from .synthetic import PRESETS, generate_synthetic


def _config(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _read_flows(flow_dir, n_frames: int):
    if flow_dir is None:
        return None
    d = Path(flow_dir)
    flows = []
    for t in range(n_frames - 1):
        p = d / flow_filename(t)
        if not p.exists():
            raise FileNotFoundError(f"missing flow file {p}")
        flows.append(read_flow(p))
    return flows


def cmd_synth(args) -> int:
    scene = PRESETS[args.scene]() if args.frames is None else PRESETS[args.scene](args.frames)
    generate_synthetic(scene, seed=args.seed or 0, out_dir=args.out)
    print(f"wrote {args.scene} scene ({scene.n_frames} frames) to {args.out}")
    return 0


def cmd_run(args, mode: str) -> int:
    cfg = _config(args)
    frames = io.load_sequence(args.seq)
    init = io.read_init(args.init)
    flows = _read_flows(args.flow_dir, len(frames))
    bg = Frame(io.read_image(args.background)) if args.background else None
    res = run_pipeline(mode, frames, init, cfg, flows=flows, background=bg, out_dir=args.out)
    n_iter = sum(len(s.history) for s in res.segments)
    print(f"{mode}: {len(frames)} frames, {len(res.tracks)} targets"
          + (f", {n_iter} dual iterations" if mode == "joint" else "") + f"; outputs in {args.out}")
    return 0


def cmd_eval(args) -> int:
    pred = Path(args.pred)
    gt = Path(args.gt)
    metrics = {}
    if (pred / "tracks.csv").exists():
        gt_b = io.tracks_by_frame(io.read_tracks(gt / "gt_tracks.csv"))
        hyp_b = io.tracks_by_frame(io.read_tracks(pred / "tracks.csv"))
        frames = sorted(set(hyp_b))
        metrics.update(clear_mot({f: gt_b.get(f, {}) for f in frames}, hyp_b, args.iou).as_dict())
    if (pred / "masks").is_dir():
        gm, pm = io.read_masks(gt / "gt_masks"), io.read_masks(pred / "masks")
        common = sorted(set(gm) & set(pm))
        if common:
            metrics.update(seg_report({f: gm[f] for f in common}, {f: pm[f] for f in common}).as_dict())
    if not metrics:
        raise FileNotFoundError(f"{pred}: no tracks.csv or masks/ to evaluate")
    out = Path(args.out) if args.out else pred
    io.write_metrics(out, metrics)
    for k, v in metrics.items():
        print(f"{k}={v}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dualtrack", description="Joint multi-target tracking and segmentation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="render a synthetic scene with ground truth")
    s.add_argument("--scene", choices=sorted(PRESETS), default="crossing")
    s.add_argument("--frames", type=int, help="default depends on the scene")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    for name, default_mode in (("track", "track-only"), ("joint", "joint")):
        r = sub.add_parser(name, help=f"run the pipeline (default mode {default_mode})")
        r.add_argument("--seq", required=True, help="directory of numbered .ppm/.png frames")
        r.add_argument("--init", required=True, help="CSV frame,target_id,x,y,w,h")
        r.add_argument("--out", required=True)
        r.add_argument("--config")
        r.add_argument("--flow-dir", help="precomputed flow_NNNNNN.bin files")
        r.add_argument("--background", help="background plate image")
        r.add_argument("--mode", choices=MODES, default=default_mode)
        r.add_argument("--seed", type=int)

    e = sub.add_parser("eval", help="score pipeline outputs against ground truth")
    e.add_argument("--gt", required=True, help="directory with gt_tracks.csv and gt_masks/")
    e.add_argument("--pred", required=True, help="pipeline output directory")
    e.add_argument("--out", help="where to write metrics.txt/metrics.json (default: --pred)")
    e.add_argument("--iou", type=float, default=0.5)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return cmd_synth(args)
        if args.command in ("track", "joint"):
            return cmd_run(args, args.mode)
        return cmd_eval(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
