"""Constant-speed vehicle trajectories over a scene's terrain."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..dataset_io import Odometry
from ..errors import ConfigError, GenerationError
from ..geometry import quat_from_euler
from .scene import Scene

# Half-length of the baseline used to read terrain slope under the vehicle.
_SLOPE_BASE = 1.0


@dataclass
class TrajectorySpec:
    """A polyline driven at constant speed.

    ``duration`` extends the run past the end of the path with the vehicle
    parked at the last waypoint; two identical waypoints plus a duration
    give a stationary dataset.
    """

    waypoints: np.ndarray
    speed: float = 2.5
    sample_rate: float = 100.0
    spacing: float = 20.0
    duration: float = 0.0

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=np.float64).reshape(-1, 2)
        self.validate()

    def validate(self) -> None:
        if len(self.waypoints) < 2:
            raise ConfigError("a trajectory needs at least 2 waypoints")
        if not np.all(np.isfinite(self.waypoints)):
            raise ConfigError("waypoints must be finite")
        if self.speed <= 0:
            raise ConfigError("speed must be > 0")
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be > 0")
        if self.spacing <= 0:
            raise ConfigError("spacing must be > 0")
        if self.duration < 0:
            raise ConfigError("duration must be >= 0")

    @classmethod
    def straight(cls, start, end, spacing: float = 20.0, **kwargs) -> "TrajectorySpec":
        """Waypoints every ``spacing`` meters from ``start`` to ``end``."""
        start, end = np.asarray(start, float), np.asarray(end, float)
        n = max(int(np.ceil(np.linalg.norm(end - start) / spacing)), 1)
        pts = start + np.linspace(0.0, 1.0, n + 1)[:, None] * (end - start)
        return cls(pts, spacing=spacing, **kwargs)

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)))

    @property
    def total_time(self) -> float:
        return max(self.length / self.speed, self.duration)

    def position_2d(self, t) -> tuple:
        """(x, y, heading) at times ``t``."""
        seg = np.diff(self.waypoints, axis=0)
        seg_len = np.linalg.norm(seg, axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        moving = seg_len > 0
        if np.any(moving):
            headings = np.arctan2(seg[:, 1], seg[:, 0])
            # Zero-length segments inherit the previous heading.
            first = headings[np.argmax(moving)]
            for i in range(len(headings)):
                if not moving[i]:
                    headings[i] = headings[i - 1] if i else first
        else:
            headings = np.zeros(len(seg))
        s = np.minimum(np.asarray(t, float) * self.speed, cum[-1])
        i = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
        u = np.where(seg_len[i] > 0, (s - cum[i]) / np.where(seg_len[i] > 0, seg_len[i], 1.0), 0.0)
        xy = self.waypoints[i] + u[..., None] * seg[i]
        return xy[..., 0], xy[..., 1], headings[i]


def load_trajectory(path: Path, speed: float = 2.5, sample_rate: float = 100.0,
                    spacing: float = 20.0, duration: float = 0.0) -> TrajectorySpec:
    """Waypoint CSV with an ``x,y`` header."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"x", "y"} <= set(reader.fieldnames):
                raise ConfigError(f"{path}: header must contain x,y")
            pts = [(float(r["x"]), float(r["y"])) for r in reader]
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None
    return TrajectorySpec(np.array(pts), speed=speed, sample_rate=sample_rate,
                          spacing=spacing, duration=duration)


def save_trajectory(spec: TrajectorySpec, path: Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for x, y in spec.waypoints:
            writer.writerow([repr(float(x)), repr(float(y))])


def sample_times(total: float, rate: float) -> np.ndarray:
    n = int(np.floor(total * rate + 1e-9))
    t = np.arange(n + 1) / rate
    if t[-1] < total - 1e-12:
        t = np.append(t, total)
    if len(t) == 1:
        t = np.array([0.0, 1.0 / rate])
    return t


def vehicle_poses(scene: Scene, spec: TrajectorySpec, t: np.ndarray):
    """Positions on the terrain and orientations following its local slope."""
    x, y, yaw = spec.position_2d(t)
    outside = ~scene.contains(x, y)
    if np.any(outside):
        k = int(np.argmax(outside))
        raise GenerationError(f"trajectory leaves the scene at t={float(t[k]):.3f} s")
    h = scene.ground.height
    z = h(x, y)
    cy, sy = np.cos(yaw), np.sin(yaw)
    d = _SLOPE_BASE
    fwd = (h(x + d * cy, y + d * sy) - h(x - d * cy, y - d * sy)) / (2 * d)
    lat = (h(x - d * sy, y + d * cy) - h(x + d * sy, y - d * cy)) / (2 * d)
    bad = ~np.isfinite(z) | ~np.isfinite(fwd) | ~np.isfinite(lat)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise GenerationError(f"trajectory leaves the terrain at t={float(t[k]):.3f} s")
    q = quat_from_euler(np.arctan(lat), -np.arctan(fwd), yaw)
    return np.column_stack([x, y, z]), q


def build_odometry(scene: Scene, spec: TrajectorySpec, min_duration: float = 0.0) -> Odometry:
    """Odometry sampled at the trajectory's rate, always including the final time."""
    total = max(spec.total_time, min_duration)
    t = sample_times(total, spec.sample_rate)
    pos, quat = vehicle_poses(scene, spec, t)
    return Odometry(t, pos, quat)

