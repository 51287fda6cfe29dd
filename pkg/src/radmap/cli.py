"""Command line entry point: ``radmap sim gen``, ``radmap map run`` and ``radmap eval``.

Machine-readable results go to stdout as one JSON line per command;
human-readable messages go to stderr.

Exit codes:
    0  success
    1  unexpected internal error
    2  configuration error (bad config, scene, trajectory or flag value)
    3  I/O or data error (missing, malformed or empty inputs, refusing to overwrite)
    4  odometry gap (a pose was needed outside the odometry span)
    5  misaligned rasters
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import shutil
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .config import PipelineConfig, load_config
from .dataset_io import read_dataset, read_odometry, read_raster
from .errors import (
    AlignmentError,
    ConfigError,
    EmptyInputError,
    ExtrapolationError,
    FormatError,
    GenerationError,
)
from .evaluation import (
    MapDiffSeries,
    collect_points,
    detection_distance,
    distance_to_bounds,
    effective_range,
    heightmap_diff,
    histogram_svg,
    max_range,
    obstacle_in_bounds,
    pair_frames,
    range_histogram,
    series_svg,
    write_diff_csv,
    write_histogram_csv,
)
from .pipeline import MapRunner
from .simulator import generate_dataset, load_scene
from .simulator.trajectory import load_trajectory
from .terrain import write_stack

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_ODOMETRY = 4
EXIT_ALIGNMENT = 5

FRAMES_HEADER = ["frame", "t", "x", "y", "z", "points_presented", "points_integrated"]
TIMING_HEADER = ["frame", "t", "integrate_ms", "stack_ms", "total_ms"]


class OutputExistsError(OSError):
    pass


def _emit(record: dict) -> None:
    sys.stdout.write(json.dumps(record, sort_keys=True) + "\n")
    sys.stdout.flush()


def _log(message: str) -> None:
    sys.stderr.write(message + "\n")


def _prepare_out(path: Path, force: bool) -> Path:
    path = Path(path)
    if path.exists():
        if not path.is_dir():
            raise OutputExistsError(f"{path} exists and is not a directory")
        if any(path.iterdir()):
            if not force:
                raise OutputExistsError(f"{path} is not empty; pass --force to overwrite")
            shutil.rmtree(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _config(args) -> PipelineConfig:
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = dataclasses.replace(config, sim=dataclasses.replace(config.sim, seed=args.seed))
    if getattr(args, "threshold", None) is not None:
        config = config.with_threshold(args.threshold)
    for part in (config.radar, config.lidar, config.grid, config.terrain, config.sim, config.eval):
        part.validate()
    config.validate()
    return config


# -- sim gen -------------------------------------------------------------


def cmd_sim_gen(args) -> int:
    config = _config(args)
    scene = load_scene(args.scene)
    trajectory = load_trajectory(args.trajectory, speed=config.sim.speed,
                                 sample_rate=config.sim.odometry_rate,
                                 spacing=config.sim.waypoint_spacing,
                                 duration=config.sim.min_duration)
    out = _prepare_out(args.out, args.force)
    _log(f"generating dataset in {out}")
    manifest = generate_dataset(scene, trajectory, config, out)
    counts = {s: sum(1 for e in manifest.scan_index if e.sensor == s) for s in ("radar", "lidar")}
    t0, t1 = read_odometry(out / "odometry.csv").span
    _emit({"command": "sim gen", "out": str(out), "radar_scans": counts["radar"],
           "lidar_scans": counts["lidar"], "duration_s": round(t1 - t0, 6)})
    return EXIT_OK


# -- map run -------------------------------------------------------------


def cmd_map_run(args) -> int:
    config = _config(args)
    dataset = read_dataset(args.dataset)
    out = _prepare_out(args.out, args.force)
    runner = MapRunner(dataset, config, args.sensor)
    totals: List[float] = []
    with (out / "frames.csv").open("w", newline="", encoding="utf-8") as ff, \
            (out / "timing.csv").open("w", newline="", encoding="utf-8") as tf:
        frames_csv, timing_csv = csv.writer(ff), csv.writer(tf)
        frames_csv.writerow(FRAMES_HEADER)
        timing_csv.writerow(TIMING_HEADER)
        for frame in runner.frames():
            write_stack(frame.stack, out / "frames" / f"{frame.index:06d}")
            x, y, z = (float(v) for v in frame.position)
            frames_csv.writerow([frame.index, repr(frame.t), repr(x), repr(y), repr(z),
                                 frame.points_presented, frame.points_integrated])
            timing_csv.writerow([frame.index, repr(frame.t)]
                                + [f"{frame.timing[k]:.3f}" for k in TIMING_HEADER[2:]])
            totals.append(frame.timing["total_ms"])
    meta = {"sensor": args.sensor, "threshold": config.radar.detection_threshold,
            "frames": len(totals), "config": config.to_dict()}
    (out / "run.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    median = float(np.median(totals)) if totals else 0.0
    _log(f"{len(totals)} {args.sensor} frames, median {median:.1f} ms per frame")
    _emit({"command": "map run", "out": str(out), "sensor": args.sensor, "frames": len(totals),
           "threshold": config.radar.detection_threshold, "median_ms": round(median, 3)})
    return EXIT_OK


def read_frames(run_dir: Path) -> List[dict]:
    """Rows of a run's ``frames.csv`` with numeric fields parsed."""
    path = Path(run_dir) / "frames.csv"
    if not path.exists():
        raise FileNotFoundError(f"frames table not found: {path}")
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != FRAMES_HEADER:
            raise FormatError(f"{path}: expected columns {FRAMES_HEADER}")
        for r in reader:
            try:
                rows.append({"frame": int(r["frame"]), "t": float(r["t"]),
                             "position": (float(r["x"]), float(r["y"]), float(r["z"]))})
            except ValueError:
                raise FormatError(f"{path}: malformed row {r}") from None
    return rows


def _layer(run_dir: Path, frame: int, name: str):
    return read_raster(Path(run_dir) / "frames" / f"{frame:06d}" / f"{name}.f32")


# -- eval ----------------------------------------------------------------


def cmd_eval_hist(args) -> int:
    config = _config(args)
    dataset = read_dataset(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    thresholds: Sequence[Optional[float]] = args.thresholds if args.sensor == "radar" else [None]
    for thr in thresholds:
        points = collect_points(dataset, config, args.sensor, thr)
        hist = range_histogram(points, config.eval.bin_width)
        stem = args.sensor if thr is None else f"{args.sensor}_{thr:.2f}"
        write_histogram_csv(hist, out / f"hist_{stem}.csv")
        if args.svg or config.eval.svg:
            histogram_svg(hist, out / f"hist_{stem}.svg", title=f"{stem} range histogram")
        _emit({"command": "eval hist", "sensor": args.sensor, "threshold": thr,
               "points": hist.total,
               "effective_range_m": effective_range(hist, config.eval.floor_pct),
               "max_range_m": round(max_range(points), 6),
               "csv": str(out / f"hist_{stem}.csv")})
    return EXIT_OK


def cmd_eval_diff(args) -> int:
    radar_rows, lidar_rows = read_frames(args.radar), read_frames(args.lidar)
    series = MapDiffSeries()
    pairs = pair_frames([(r["frame"], r["t"]) for r in radar_rows],
                        [(r["frame"], r["t"]) for r in lidar_rows])
    for ri, li, t in pairs:
        stats = heightmap_diff(_layer(args.radar, ri, "ground"), _layer(args.lidar, li, "ground"))
        series.append(ri, t, stats)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_diff_csv(series, out / "diff.csv")
    if args.svg:
        series_svg(series, out / "diff.svg")
    mae = series.mean_abs_error
    valid = mae[np.isfinite(mae)] if len(mae) else mae
    _emit({"command": "eval diff", "frames": len(series),
           "max_mean_abs_error_m": float(valid.max()) if len(valid) else None,
           "median_mean_abs_error_m": float(np.median(valid)) if len(valid) else None,
           "csv": str(out / "diff.csv")})
    return EXIT_OK


def cmd_eval_detect(args) -> int:
    bounds = tuple(args.bounds)
    if bounds[0] > bounds[2] or bounds[1] > bounds[3]:
        raise ConfigError("bounds must be xmin ymin xmax ymax with min <= max")
    if args.sustain < 1:
        raise ConfigError("--sustain must be >= 1")
    result = {}
    for sensor, run_dir in (("radar", args.radar), ("lidar", args.lidar)):
        if run_dir is None:
            continue
        hits, dists = [], []
        for row in read_frames(run_dir):
            hits.append(obstacle_in_bounds(_layer(run_dir, row["frame"], "obstacle"), bounds))
            dists.append(distance_to_bounds(row["position"], bounds))
        result[sensor] = detection_distance(hits, dists, args.sustain)
    if not result:
        raise ConfigError("pass --radar and/or --lidar run directories")
    record = {"command": "eval detect", "bounds": list(bounds),
              "detection_range_m": result}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "detect.json").write_text(json.dumps(record, indent=1, sort_keys=True) + "\n",
                                         encoding="utf-8")
    _emit(record)
    return EXIT_OK


# -- parser --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radmap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"radmap {__version__}")
    top = parser.add_subparsers(dest="group", required=True)

    sim = top.add_parser("sim", help="synthetic dataset generation").add_subparsers(dest="cmd", required=True)
    gen = sim.add_parser("gen", help="simulate a drive through a scene and write a dataset")
    gen.add_argument("--scene", type=Path, required=True, help="scene JSON")
    gen.add_argument("--trajectory", type=Path, required=True, help="waypoint CSV with x,y header")
    gen.add_argument("--config", type=Path, help="pipeline config JSON (defaults if omitted)")
    gen.add_argument("--out", type=Path, required=True, help="output dataset directory")
    gen.add_argument("--seed", type=int, help="override sim.seed")
    gen.add_argument("--force", action="store_true", help="replace a non-empty output directory")
    gen.set_defaults(func=cmd_sim_gen)

    mp = top.add_parser("map", help="map building").add_subparsers(dest="cmd", required=True)
    run = mp.add_parser("run", help="replay a dataset into terrain rasters, one set per frame")
    run.add_argument("--dataset", type=Path, required=True)
    run.add_argument("--config", type=Path)
    run.add_argument("--sensor", choices=("radar", "lidar"), default="radar")
    run.add_argument("--threshold", type=float, help="override radar.detection_threshold")
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--force", action="store_true")
    run.set_defaults(func=cmd_map_run)

    ev = top.add_parser("eval", help="analyses").add_subparsers(dest="cmd", required=True)
    hist = ev.add_parser("hist", help="range histograms and effective/max range")
    hist.add_argument("--dataset", type=Path, required=True)
    hist.add_argument("--config", type=Path)
    hist.add_argument("--sensor", choices=("radar", "lidar"), default="radar")
    hist.add_argument("--thresholds", type=float, nargs="+", default=[0.26, 0.31],
                      help="radar thresholds, one histogram each")
    hist.add_argument("--out", type=Path, required=True)
    hist.add_argument("--svg", action="store_true")
    hist.set_defaults(func=cmd_eval_hist)

    diff = ev.add_parser("diff", help="per-frame radar-vs-lidar ground error")
    diff.add_argument("--radar", type=Path, required=True, help="radar map run directory")
    diff.add_argument("--lidar", type=Path, required=True, help="lidar map run directory")
    diff.add_argument("--out", type=Path, required=True)
    diff.add_argument("--svg", action="store_true")
    diff.set_defaults(func=cmd_eval_diff)

    det = ev.add_parser("detect", help="distance at which each sensor first flags an object")
    det.add_argument("--radar", type=Path, help="radar map run directory")
    det.add_argument("--lidar", type=Path, help="lidar map run directory")
    det.add_argument("--bounds", type=float, nargs=4, required=True,
                     metavar=("XMIN", "YMIN", "XMAX", "YMAX"))
    det.add_argument("--sustain", type=int, default=2, help="consecutive frames required")
    det.add_argument("--out", type=Path)
    det.set_defaults(func=cmd_eval_detect)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ExtrapolationError as exc:
        _log(f"odometry gap: {exc}")
        return EXIT_ODOMETRY
    except AlignmentError as exc:
        _log(f"misaligned rasters: {exc}")
        return EXIT_ALIGNMENT
    except (ConfigError, GenerationError) as exc:
        _log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except (FormatError, EmptyInputError, OSError) as exc:
        _log(f"I/O error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
