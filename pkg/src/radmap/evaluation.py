"""Range histograms, range metrics, height-map differences and detection range."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .config import PipelineConfig
from .dataset_io import RasterMap
from .errors import AlignmentError, EmptyInputError
from .pipeline import TIME_TOLERANCE, Frame, MapRunner, frame_times, scan_points
from .radar_frontend import PointCloud

Bounds = Tuple[float, float, float, float]


# -- range statistics ----------------------------------------------------


@dataclass
class RangeHistogram:
    bin_width: float
    counts: np.ndarray

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError("bin_width must be > 0")
        self.counts = np.asarray(self.counts, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def percentages(self) -> np.ndarray:
        if self.total == 0:
            return np.zeros(len(self.counts))
        return self.counts * (100.0 / self.total)

    @property
    def edges(self) -> np.ndarray:
        return np.arange(len(self.counts) + 1) * self.bin_width


def _ranges(points) -> np.ndarray:
    if isinstance(points, PointCloud):
        return points.ranges()
    return np.asarray(points, dtype=np.float64).reshape(-1)


def range_histogram(points, bin_width: float = 1.0) -> RangeHistogram:
    """Point counts per range bin, ranges measured from each point's own sensor origin.

    ``points`` is a :class:`PointCloud` or an array of precomputed ranges.
    """
    r = _ranges(points)
    if len(r) == 0:
        raise EmptyInputError("range histogram of an empty point set")
    idx = np.floor(r / bin_width).astype(np.int64)
    return RangeHistogram(bin_width, np.bincount(idx, minlength=int(idx.max()) + 1))


def effective_range(hist: RangeHistogram, floor_pct: float = 0.25) -> float:
    """Upper edge of the farthest bin holding at least ``floor_pct`` percent; 0 if none does."""
    ok = np.nonzero(hist.percentages >= floor_pct)[0]
    if len(ok) == 0:
        return 0.0
    return float((ok[-1] + 1) * hist.bin_width)


def max_range(points) -> float:
    r = _ranges(points)
    if len(r) == 0:
        raise EmptyInputError("max range of an empty point set")
    return float(r.max())


def collect_points(dataset, config: PipelineConfig, sensor: str,
                   threshold: Optional[float] = None) -> PointCloud:
    """All world-frame points of one sensor over the whole dataset."""
    clouds = []
    for i, entry in enumerate(dataset.scans):
        if entry.sensor == sensor:
            clouds.append(scan_points(dataset.load_scan(i), dataset, config, threshold))
    return PointCloud.concat(clouds)


def above_threshold(cloud: PointCloud, threshold: float) -> PointCloud:
    """Radar points whose recorded intensity meets a (higher) threshold."""
    keep = cloud.intensity.astype(np.float32) >= np.float32(threshold)
    return PointCloud(cloud.positions[keep], cloud.intensity[keep], cloud.t[keep], cloud.origins[keep])


# -- height-map comparison -----------------------------------------------


@dataclass(frozen=True)
class DiffStats:
    mean_abs_error: float
    std: float
    compared: int
    radar_only: int


def heightmap_diff(radar_ground: RasterMap, lidar_ground: RasterMap) -> DiffStats:
    """Error statistics over cells valid in both maps; cells valid (non-NaN) only in radar are counted."""
    if not radar_ground.aligned_with(lidar_ground):
        raise AlignmentError(
            f"rasters differ: {radar_ground.width}x{radar_ground.height} at {radar_ground.origin} "
            f"res {radar_ground.resolution} vs {lidar_ground.width}x{lidar_ground.height} "
            f"at {lidar_ground.origin} res {lidar_ground.resolution}"
        )
    r = radar_ground.values.astype(np.float64)
    li = lidar_ground.values.astype(np.float64)
    rv, lv = ~np.isnan(r), ~np.isnan(li)
    both = rv & lv
    radar_only = int(np.count_nonzero(rv & ~lv))
    n = int(np.count_nonzero(both))
    if n == 0:
        return DiffStats(0.0, 0.0, 0, radar_only)
    err = np.abs(r[both] - li[both])
    return DiffStats(float(err.mean()), float(err.std()), n, radar_only)


@dataclass
class MapDiffRow:
    frame: int
    t: float
    stats: DiffStats


@dataclass
class MapDiffSeries:
    rows: List[MapDiffRow] = field(default_factory=list)

    def append(self, frame: int, t: float, stats: DiffStats) -> None:
        self.rows.append(MapDiffRow(frame, t, stats))

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def mean_abs_error(self) -> np.ndarray:
        return np.array([r.stats.mean_abs_error for r in self.rows])

    @property
    def std(self) -> np.ndarray:
        return np.array([r.stats.std for r in self.rows])


def pair_frames(radar: Sequence[Tuple[int, float]], lidar: Sequence[Tuple[int, float]],
                tol: float = 1e-6) -> List[Tuple[int, int, float]]:
    """Match (index, t) lists by time; returns (radar index, lidar index, t)."""
    lt = np.array([t for _, t in lidar]) if lidar else np.zeros(0)
    pairs = []
    for ri, t in radar:
        if len(lt) == 0:
            break
        j = int(np.argmin(np.abs(lt - t)))
        if abs(lt[j] - t) <= tol:
            pairs.append((ri, lidar[j][0], t))
    return pairs


def diff_series(radar_frames: Iterable[Frame], lidar_frames: Iterable[Frame]) -> MapDiffSeries:
    radar_frames, lidar_frames = list(radar_frames), list(lidar_frames)
    pairs = pair_frames([(f.index, f.t) for f in radar_frames], [(f.index, f.t) for f in lidar_frames])
    series = MapDiffSeries()
    for ri, li, t in pairs:
        series.append(ri, t, heightmap_diff(radar_frames[ri].stack.ground, lidar_frames[li].stack.ground))
    return series


def height_error_series(dataset, config: PipelineConfig) -> MapDiffSeries:
    """Radar-vs-lidar ground error at every radar frame, streaming both replays.

    Lidar stacks are only built at radar frame times, which keeps long runs
    cheap in time and memory.
    """
    times = frame_times(dataset, "radar")
    lidar = MapRunner(dataset, config, "lidar", stack_times=times).frames()
    series = MapDiffSeries()
    pending = next(lidar, None)
    for frame in MapRunner(dataset, config, "radar").frames():
        while pending is not None and pending.t < frame.t - TIME_TOLERANCE:
            pending = next(lidar, None)
        if pending is not None and abs(pending.t - frame.t) <= TIME_TOLERANCE:
            series.append(frame.index, frame.t, heightmap_diff(frame.stack.ground, pending.stack.ground))
    return series


# -- detection range -----------------------------------------------------


def distance_to_bounds(position, bounds: Bounds) -> float:
    """Planar distance from a point to an axis-aligned rectangle (0 inside)."""
    x, y = float(position[0]), float(position[1])
    xmin, ymin, xmax, ymax = bounds
    dx = max(xmin - x, 0.0, x - xmax)
    dy = max(ymin - y, 0.0, y - ymax)
    return math.hypot(dx, dy)


def obstacle_in_bounds(obstacle: RasterMap, bounds: Bounds) -> bool:
    """True when an obstacle cell overlaps the rectangle by a positive area."""
    cx, cy = obstacle.cell_centers()
    half = 0.5 * obstacle.resolution
    xmin, ymin, xmax, ymax = bounds
    inside = (cx + half > xmin) & (cx - half < xmax) & (cy + half > ymin) & (cy - half < ymax)
    return bool(np.any(obstacle.xy[inside] > 0))


def first_sustained(flags: Sequence[bool], sustain: int) -> Optional[int]:
    """Index of the first run of at least ``sustain`` consecutive True values."""
    run = 0
    for i, f in enumerate(flags):
        run = run + 1 if f else 0
        if run >= sustain:
            return i - sustain + 1
    return None


def detection_distance(hits: Sequence[bool], distances: Sequence[float], sustain: int = 2) -> Optional[float]:
    k = first_sustained(hits, sustain)
    return None if k is None else float(distances[k])


def detection_range(dataset, bounds: Bounds, config: PipelineConfig,
                    sensors: Sequence[str] = ("radar", "lidar")) -> Dict[str, Optional[float]]:
    """Vehicle-to-object distance when each sensor's obstacle map first flags the object.

    A detection must persist for ``config.eval.sustain_frames`` consecutive
    frames; ``None`` means the sensor never detected it.
    """
    out: Dict[str, Optional[float]] = {}
    for sensor in sensors:
        hits, dists = [], []
        for frame in MapRunner(dataset, config, sensor).frames():
            hits.append(obstacle_in_bounds(frame.stack.obstacle, bounds))
            dists.append(distance_to_bounds(frame.position, bounds))
        out[sensor] = detection_distance(hits, dists, config.eval.sustain_frames)
    return out


# -- artifacts -----------------------------------------------------------


def write_histogram_csv(hist: RangeHistogram, path: Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["range_lo_m", "range_hi_m", "count", "percent"])
        for i, (c, p) in enumerate(zip(hist.counts, hist.percentages)):
            w.writerow([f"{i * hist.bin_width:.6g}", f"{(i + 1) * hist.bin_width:.6g}", int(c), f"{p:.6f}"])


def write_diff_csv(series: MapDiffSeries, path: Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "t", "mean_abs_error_m", "std_m", "compared_cells", "radar_only_cells"])
        for r in series.rows:
            s = r.stats
            w.writerow([r.frame, f"{r.t:.6f}", f"{s.mean_abs_error:.6f}", f"{s.std:.6f}", s.compared, s.radar_only])


def _svg(width: int, height: int, body: List[str], title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">')
    return "\n".join([head, f'<text x="10" y="16" font-size="12">{title}</text>', *body, "</svg>", ""])


def histogram_svg(hist: RangeHistogram, path: Path, title: str = "range histogram") -> None:
    """Bar chart of percentages per bin."""
    w, h, pad = 640, 320, 30
    pct = hist.percentages
    top = max(float(pct.max(initial=0.0)), 1e-9)
    bw = (w - 2 * pad) / max(len(pct), 1)
    bars = []
    for i, p in enumerate(pct):
        bh = (h - 2 * pad) * p / top
        bars.append(f'<rect x="{pad + i * bw:.2f}" y="{h - pad - bh:.2f}" '
                    f'width="{max(bw, 0.5):.2f}" height="{bh:.2f}" fill="steelblue"/>')
    bars.append(f'<text x="{pad}" y="{h - 8}" font-size="10">0 m</text>')
    bars.append(f'<text x="{w - pad - 40}" y="{h - 8}" font-size="10">'
                f'{len(pct) * hist.bin_width:.0f} m</text>')
    Path(path).write_text(_svg(w, h, bars, title), encoding="utf-8")


def series_svg(series: MapDiffSeries, path: Path, title: str = "height map error") -> None:
    """Mean absolute error and standard deviation over time as two polylines."""
    w, h, pad = 640, 320, 30
    t = np.array([r.t for r in series.rows]) if len(series) else np.zeros(1)
    span = max(float(t.max() - t.min()), 1e-9)
    top = max(float(np.max(series.mean_abs_error, initial=0.0)), float(np.max(series.std, initial=0.0)), 1e-9)
    body = []
    for values, colour in ((series.mean_abs_error, "crimson"), (series.std, "gray")):
        pts = " ".join(
            f"{pad + (w - 2 * pad) * (ti - t.min()) / span:.2f},{h - pad - (h - 2 * pad) * v / top:.2f}"
            for ti, v in zip(t, values)
        )
        body.append(f'<polyline fill="none" stroke="{colour}" points="{pts}"/>')
    Path(path).write_text(_svg(w, h, body, title), encoding="utf-8")
