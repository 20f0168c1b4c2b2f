"""Command line entry point: ``nanonav {run, sweep, eval-detections, plot}``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import harness, metrics
from .harness import ConfigError


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario config as a JSON file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field, e.g. planner.k_vel=1.5 (repeatable)")
    p.add_argument("--seed", type=int, required=True, help="master seed")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--formats", default="csv,jsonl,svg", help="comma-separated subset of csv,jsonl,svg")


def _formats(s: str) -> list[str]:
    fmts = [f.strip() for f in s.split(",") if f.strip()]
    bad = set(fmts) - {"csv", "jsonl", "svg"}
    if bad:
        raise ConfigError(f"--formats: unknown format(s) {sorted(bad)}")
    return fmts


def _nan_to_none(x):
    return None if isinstance(x, float) and math.isnan(x) else x


def cmd_run(args) -> int:
    cfg = harness.load_config(args.config, args.overrides)
    if args.obstacle_class is not None:
        cls = None if args.obstacle_class == "none" else args.obstacle_class
        cfg = harness.cell_config(cfg, cfg.planner.k_vel, cls)
    res = harness.run_scenario(cfg, args.seed)
    out = harness.write_run(res, args.out, _formats(args.formats))
    print(json.dumps(res.report.to_dict()))
    print(f"wrote {out}", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    cfg = harness.load_config(args.config, args.overrides)
    classes = None
    if args.classes:
        classes = [None if c == "none" else c for c in args.classes.split(",")]
    result = harness.sweep(cfg, args.seed, jobs=args.jobs, classes=classes)
    out = harness.write_sweep(result, args.out, per_run=not args.summary_only, formats=_formats(args.formats))
    sys.stdout.write(harness.summary_csv(result.rows))
    print(f"best k_vel: {result.best_k_vel()}", file=sys.stderr)
    print(f"wrote {out}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    frames = metrics.read_detection_log(args.log)
    series, mean = metrics.window_map(frames, args.window, args.stride)
    report = {
        "frames": len(frames),
        "coco_map": _nan_to_none(metrics.coco_map(frames)),
        "ap50": _nan_to_none(metrics.ap_at_iou(frames, 0.5)),
        "window_map_mean": _nan_to_none(mean),
        "window_map_series": [_nan_to_none(s) for s in series],
    }
    if args.run_report:
        with open(args.run_report) as fh:
            report = {**json.load(fh), **report}
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _read_run(run_dir: Path):
    with open(run_dir / "config.json") as fh:
        cfg = json.load(fh)
    with open(run_dir / "trajectory.csv") as fh:
        rows = list(csv.DictReader(fh))
    path = [(float(r["est_x"]), float(r["est_y"])) for r in rows]
    failed = False
    if (run_dir / "report.json").exists():
        with open(run_dir / "report.json") as fh:
            failed = not json.load(fh)["success"]
    return cfg, path, failed


def cmd_plot(args) -> int:
    root = Path(args.dir)
    run_dirs = sorted(p.parent for p in root.rglob("trajectory.csv"))
    if not run_dirs:
        print(f"no trajectory.csv under {root}", file=sys.stderr)
        return 1
    paths, failed, obstacles, waypoints = [], [], [], None
    for d in run_dirs:
        cfg_d, path, bad = _read_run(d)
        cfg = harness.ScenarioConfig.from_dict(cfg_d)
        waypoints = cfg.waypoints
        for o in cfg.obstacles:
            if o not in obstacles:
                obstacles.append(o)
        paths.append(path)
        failed.append(bad)
    svg = harness.render_svg(waypoints, obstacles, paths, failed=failed)
    out = Path(args.out) if args.out else root / "paths.svg"
    out.write_text(svg)
    print(f"wrote {out} ({len(paths)} paths)", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nanonav", description="Split-computing reactive navigation simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one closed-loop run")
    _add_config_args(p)
    p.add_argument("--class", dest="obstacle_class", choices=["cube", "short", "large", "column", "none"],
                   help="replace the configured obstacles with one of this class")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="k_vel x class x repetition grid")
    _add_config_args(p)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--classes", help="comma-separated obstacle classes (default from config; 'none' allowed)")
    p.add_argument("--summary-only", action="store_true", help="skip per-run artifacts")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval-detections", help="score a detection log (JSONL)")
    p.add_argument("log")
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--run-report", help="report.json to merge into the output")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="render top-view paths of a run or sweep directory")
    p.add_argument("dir")
    p.add_argument("--out", help="SVG path (default: <dir>/paths.svg)")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
