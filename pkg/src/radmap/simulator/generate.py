"""Whole-run generation: odometry plus interleaved radar and lidar scans."""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional

import numpy as np

from ..config import LidarConfig, PipelineConfig, RadarConfig
from ..dataset_io import (
    DatasetManifest,
    DatasetWriter,
    Odometry,
    ScanEntry,
    interpolate_pose,
)
from .lidar import column_offsets, simulate_lidar_scan
from .radar import azimuth_offsets, simulate_radar_scan
from .scene import Scene
from .trajectory import TrajectorySpec, build_odometry

SENSOR_CODES = {"radar": 0, "lidar": 1}


def scan_rng(seed: int, sensor: str, index: int) -> np.random.Generator:
    """Independent substream per scan, so scans can be made in any order."""
    return np.random.default_rng(np.random.SeedSequence([seed, SENSOR_CODES[sensor], index]))


def scan_schedule(odometry: Odometry, radar: RadarConfig, lidar: LidarConfig) -> List[ScanEntry]:
    """Every complete revolution inside the odometry span, sorted by start time."""
    t0, t1 = odometry.span
    entries = []
    for sensor, period in (("radar", radar.rotation_period), ("lidar", lidar.rotation_period)):
        n = int(np.floor((t1 - t0) / period + 1e-9))
        for k in range(n):
            entries.append(ScanEntry(sensor, f"{sensor}/{k:06d}.bin", t0 + k * period))
    # Radar first on ties, matching the writer's insertion order.
    entries.sort(key=lambda e: (e.start_t, SENSOR_CODES[e.sensor]))
    return entries


class SimulatedDataset:
    """Dataset look-alike whose scans are synthesized when loaded.

    Exposes the same surface as :class:`radmap.dataset_io.Dataset`, so the
    mapping pipeline and evaluation can run without touching disk.
    """

    def __init__(self, scene: Scene, odometry: Odometry, config: PipelineConfig):
        self.scene = scene
        self.odometry = odometry
        self.config = config
        self.scans = scan_schedule(odometry, config.radar, config.lidar)
        self._objects = scene.object_arrays()

    @property
    def radar_config(self) -> RadarConfig:
        return self.config.radar

    @property
    def lidar_config(self) -> LidarConfig:
        return self.config.lidar

    def scan_period(self, sensor: str) -> float:
        cfg = self.radar_config if sensor == "radar" else self.lidar_config
        return cfg.rotation_period

    def __len__(self) -> int:
        return len(self.scans)

    def load_scan(self, index: int):
        entry = self.scans[index]
        k = int(entry.path.split("/")[1].split(".")[0])
        rng = scan_rng(self.config.sim.seed, entry.sensor, k)
        if entry.sensor == "radar":
            times = entry.start_t + azimuth_offsets(self.config).astype(np.float64)
            pose = interpolate_pose(self.odometry, times)
            return simulate_radar_scan(self.scene, pose, self.config, rng, entry.start_t, self._objects)
        times = entry.start_t + column_offsets(self.config).astype(np.float64)
        pose = interpolate_pose(self.odometry, times)
        return simulate_lidar_scan(self.scene, pose, self.config, rng, entry.start_t, self._objects)


def simulate_run(scene: Scene, trajectory: TrajectorySpec,
                 config: Optional[PipelineConfig] = None) -> SimulatedDataset:
    config = config or PipelineConfig()
    config.validate()
    odometry = build_odometry(scene, trajectory, config.sim.min_duration)
    return SimulatedDataset(scene, odometry, config)


def generate_dataset(scene: Scene, trajectory: TrajectorySpec, config: PipelineConfig,
                     out_dir: Path) -> DatasetManifest:
    """Write a complete dataset directory; identical inputs give identical bytes."""
    run = simulate_run(scene, trajectory, config)
    writer = DatasetWriter(Path(out_dir), config.radar, config.lidar)
    for i in range(len(run)):
        writer.add(run.load_scan(i))
    return writer.close(run.odometry)
