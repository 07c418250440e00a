"""Command-line front end: scene generation, batch simulation, one-shot
planning, and CSV re-evaluation.

Configuration lives in one TOML or JSON file mirroring ExperimentConfig
plus the sweep axes (scene_seeds, run_seeds, methods, room_count,
bounds). Command-line flags override file values. Exit codes: 0 on
success, 2 for usage or configuration errors, 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .grid import Box, load_grid, save_grid
from .planner import (ViewPartition, argmax_per_block, greedy_plan,
                      overlap_aware_utility, plan_result_to_dict,
                      random_plan, PlanResult)
from .scoring import ScoreModel, score_views_fast
from .sensing import default_intrinsics, look_at, ViewPose
from .simulation import (ExperimentConfig, METHODS, generate_scene,
                         read_metrics_csv, run_sweep, summarize_rows,
                         write_metrics_csv)

SWEEP_KEYS = ("scene_seeds", "run_seeds", "methods", "room_count", "bounds")
DEFAULT_SWEEP = {
    "scene_seeds": [0, 1, 2, 3, 4],
    "run_seeds": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9],
    "methods": list(METHODS),
    "room_count": 3,
    "bounds": None,
}


class UsageError(Exception):
    pass


def _load_config_file(path: str) -> dict:
    try:
        if path.endswith(".json"):
            with open(path) as fh:
                return json.load(fh)
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}")
    except Exception as exc:
        raise UsageError(f"could not parse config {path}: {exc}")


def _parse_int_list(text: str) -> list:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}")


def _build_config(file_cfg: dict, args) -> tuple:
    """Merge config file and flag overrides into (ExperimentConfig, sweep)."""
    cfg_fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    base = {}
    sweep = dict(DEFAULT_SWEEP)
    for key, val in file_cfg.items():
        if key in cfg_fields:
            base[key] = val
        elif key in SWEEP_KEYS:
            sweep[key] = val
        else:
            raise UsageError(f"unknown config field: {key}")
    for key in cfg_fields:
        flag = getattr(args, key, None)
        if flag is not None:
            base[key] = flag
    for key in ("scene_seeds", "run_seeds"):
        flag = getattr(args, key, None)
        if flag is not None:
            sweep[key] = _parse_int_list(flag)
    if getattr(args, "methods", None) is not None:
        sweep["methods"] = [m for m in args.methods.split(",") if m]
    if getattr(args, "room_count", None) is not None:
        sweep["room_count"] = args.room_count
    if getattr(args, "bounds", None) is not None:
        sweep["bounds"] = {"min": [0.0, 0.0, 0.0],
                           "max": [float(v) for v in args.bounds]}
    base.pop("method", None)
    try:
        config = ExperimentConfig(**base)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}")
    for m in sweep["methods"]:
        if m not in METHODS:
            raise UsageError(f"invalid config: unknown method {m!r}")
    if not sweep["scene_seeds"] or not sweep["run_seeds"]:
        raise UsageError("invalid config: scene_seeds and run_seeds "
                         "must be non-empty")
    return config, sweep


def _bounds_from_dict(d) -> Box | None:
    if d is None:
        return None
    try:
        box = Box.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid bounds: {exc}")
    if np.any(box.extent <= 0):
        raise UsageError(f"bounds must have positive extent, got {box.extent}")
    return box


def cmd_scene_gen(args) -> int:
    bounds = Box(np.zeros(3), np.asarray(args.bounds, dtype=float)) \
        if args.bounds is not None else None
    if bounds is not None and np.any(bounds.extent <= 0):
        raise UsageError(f"bounds must have positive extent, got {args.bounds}")
    if args.resolution <= 0:
        raise UsageError(f"resolution must be positive, got {args.resolution}")
    scene, gt = generate_scene(args.seed, args.rooms, bounds, args.resolution)
    json_path = args.out + ".json"
    grid_path = args.out + ".nbvg"
    with open(json_path, "w") as fh:
        json.dump(scene.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    save_grid(gt, grid_path)
    print(f"wrote {json_path} and {grid_path} "
          f"(dims {gt.dims[0]}x{gt.dims[1]}x{gt.dims[2]})")
    return 0


def cmd_simulate(args) -> int:
    file_cfg = _load_config_file(args.config) if args.config else {}
    config, sweep = _build_config(file_cfg, args)
    bounds = _bounds_from_dict(sweep["bounds"])
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "metrics.csv")
    summary_path = os.path.join(args.out, "summary.json")
    manifest_path = os.path.join(args.out, "manifest.json")
    jobs = args.jobs if args.jobs else (os.cpu_count() or 1)

    t0 = time.perf_counter()
    rows = []
    try:
        rows = run_sweep(config, sweep["scene_seeds"], sweep["run_seeds"],
                         methods=sweep["methods"],
                         room_count=sweep["room_count"], bounds=bounds,
                         jobs=jobs, row_sink=None)
    except Exception as exc:
        if rows:
            write_metrics_csv(rows, csv_path)
            print(f"episode failure after {len(rows)} rows: {exc}",
                  file=sys.stderr)
        else:
            print(f"episode failure: {exc}", file=sys.stderr)
        return 1
    write_metrics_csv(rows, csv_path)
    summary = summarize_rows(rows)
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = {
        "tool": "nbvplan",
        "version": __version__,
        "config": dataclasses.asdict(config),
        "sweep": {k: sweep[k] for k in SWEEP_KEYS},
        "scene_seeds": list(sweep["scene_seeds"]),
        "outputs": {"metrics_csv": csv_path, "summary_json": summary_path},
        "wall_clock_s": time.perf_counter() - t0,
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {csv_path}, {summary_path}, {manifest_path}")
    return 0


def _pose_from_view(rec: dict) -> ViewPose:
    pos = np.asarray(rec["position"], dtype=float)
    if "rotation" in rec:
        return ViewPose(t=pos, R=np.asarray(rec["rotation"], dtype=float))
    if "target" in rec:
        return look_at(pos, np.asarray(rec["target"], dtype=float))
    raise KeyError("view needs a rotation or a target")


def cmd_plan(args) -> int:
    if args.method == "random" and args.seed is None:
        raise UsageError("method=random requires --seed")
    try:
        grid = load_grid(args.map)
    except (OSError, ValueError) as exc:
        raise UsageError(f"could not read map {args.map}: {exc}")
    try:
        with open(args.candidates) as fh:
            spec = json.load(fh)
        blocks = [list(b) for b in spec["blocks"]]
        poses = {int(rec["id"]): _pose_from_view(rec)
                 for rec in spec["views"]}
        partition = ViewPartition(blocks=blocks, poses=poses)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad candidates file {args.candidates}: {exc}")
    for v in partition.all_ids():
        if v not in poses:
            raise UsageError(f"bad candidates file: view {v} has no pose")

    intr = default_intrinsics(args.image_width, args.image_height,
                              args.hfov_deg)
    try:
        model = ScoreModel(gain=args.gain, weight=args.weight)
    except ValueError as exc:
        raise UsageError(str(exc))
    t0 = time.perf_counter()
    cache, naive = score_views_fast(grid, poses, intr, model,
                                    sampling=args.ray_fraction,
                                    max_range=args.max_range)
    if args.method == "ours":
        result = greedy_plan(partition, cache)
    else:
        if args.method == "single":
            chosen = argmax_per_block(partition.blocks, naive)
        else:
            chosen = random_plan(partition, args.seed)
        result = PlanResult(chosen=chosen,
                            utility=overlap_aware_utility(cache, chosen),
                            marginals=[], elapsed=time.perf_counter() - t0)
    out = plan_result_to_dict(result, round_index=0, method=args.method,
                              poses=poses)
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_eval(args) -> int:
    try:
        rows = read_metrics_csv(args.csv)
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"could not read metrics {args.csv}: {exc}")
    if not rows:
        raise UsageError(f"metrics file {args.csv} has no rows")
    summary = summarize_rows(rows)
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("config overrides")
    g.add_argument("--sensors", type=int)
    g.add_argument("--candidates-per-sensor", dest="candidates_per_sensor",
                   type=int)
    g.add_argument("--rounds", type=int)
    g.add_argument("--p-hit", dest="p_hit", type=float)
    g.add_argument("--p-miss", dest="p_miss", type=float)
    g.add_argument("--l-max", dest="l_max", type=float)
    g.add_argument("--resolution", type=float)
    g.add_argument("--max-range", dest="max_range", type=float)
    g.add_argument("--ray-fraction", dest="ray_fraction", type=float)
    g.add_argument("--gain", choices=("entropy", "unknown_indicator"))
    g.add_argument("--weight", choices=("unit", "occlusion_aware"))
    g.add_argument("--initial-random-views", dest="initial_random_views",
                   type=int)
    g.add_argument("--pose-mode", dest="pose_mode",
                   choices=("circle", "hemisphere"))
    g.add_argument("--pose-radius", dest="pose_radius", type=float)
    g.add_argument("--pose-height", dest="pose_height", type=float)
    g.add_argument("--image-width", dest="image_width", type=int)
    g.add_argument("--image-height", dest="image_height", type=int)
    g.add_argument("--hfov-deg", dest="hfov_deg", type=float)
    g.add_argument("--scene-seeds", dest="scene_seeds",
                   help="comma-separated scene seeds")
    g.add_argument("--run-seeds", dest="run_seeds",
                   help="comma-separated run seeds")
    g.add_argument("--methods", help="comma-separated subset of "
                   + ",".join(METHODS))
    g.add_argument("--room-count", dest="room_count", type=int)
    g.add_argument("--bounds", nargs=3, type=float,
                   metavar=("X", "Y", "Z"), help="scene extent in meters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nbvplan",
        description="coordinated multi-sensor next-best-view planning")
    parser.add_argument("--version", action="version",
                        version=f"nbvplan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_scene = sub.add_parser("scene", help="scene utilities")
    scene_sub = p_scene.add_subparsers(dest="scene_command", required=True)
    p_gen = scene_sub.add_parser("gen", help="generate a procedural scene")
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--rooms", type=int, default=1)
    p_gen.add_argument("--bounds", nargs=3, type=float,
                       metavar=("X", "Y", "Z"),
                       help="extent in meters, default 8 8 3")
    p_gen.add_argument("--resolution", type=float, default=0.05)
    p_gen.add_argument("--out", required=True,
                       help="output prefix; writes <out>.json and <out>.nbvg")
    p_gen.set_defaults(func=cmd_scene_gen)

    p_sim = sub.add_parser("simulate", help="run the experiment sweep")
    p_sim.add_argument("--config", help="TOML or JSON config file")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--jobs", type=int, default=0,
                       help="parallel episodes, default all cores")
    _add_config_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_plan = sub.add_parser("plan", help="one-shot plan on a saved map")
    p_plan.add_argument("--map", required=True, help="binary grid dump")
    p_plan.add_argument("--candidates", required=True,
                        help="JSON with blocks and views")
    p_plan.add_argument("--method", choices=METHODS, default="ours")
    p_plan.add_argument("--seed", type=int)
    p_plan.add_argument("--gain", default="entropy",
                        choices=("entropy", "unknown_indicator"))
    p_plan.add_argument("--weight", default="unit",
                        choices=("unit", "occlusion_aware"))
    p_plan.add_argument("--ray-fraction", dest="ray_fraction", type=float,
                        default=0.1)
    p_plan.add_argument("--max-range", dest="max_range", type=float,
                        default=10.0)
    p_plan.add_argument("--image-width", dest="image_width", type=int,
                        default=320)
    p_plan.add_argument("--image-height", dest="image_height", type=int,
                        default=240)
    p_plan.add_argument("--hfov-deg", dest="hfov_deg", type=float,
                        default=60.0)
    p_plan.set_defaults(func=cmd_plan)

    p_eval = sub.add_parser("eval", help="recompute the summary from a CSV")
    p_eval.add_argument("--csv", required=True)
    p_eval.add_argument("--out", help="summary JSON path, default stdout")
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
