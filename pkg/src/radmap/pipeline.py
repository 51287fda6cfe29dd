"""Scan replay: points into the rolling grid, one terrain stack per frame.

Scans from both sensors are walked in order of their end time.  The grid is
recentered on the vehicle at every scan end, whichever sensor is being
mapped, so radar and lidar runs over the same dataset share grid origins
at matching times and their rasters can be compared cell for cell.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .config import PipelineConfig
from .dataset_io import LidarScanRecord, interpolate_pose
from .radar_frontend import PointCloud, lidar_to_points, scan_to_points
from .terrain import TerrainStack, build_stack
from .voxel_map import VoxelGrid

SENSORS = ("radar", "lidar")
# Scan end times closer than this are treated as simultaneous.
TIME_TOLERANCE = 1e-6


@dataclass
class Frame:
    index: int
    t: float
    sensor: str
    position: np.ndarray
    stack: TerrainStack
    points_presented: int
    points_integrated: int
    timing: Dict[str, float] = field(default_factory=dict)


def replay_groups(dataset) -> List[Tuple[float, List[int]]]:
    """Scan indices grouped by (nearly) equal end time, in time order."""
    keyed = []
    for i, entry in enumerate(dataset.scans):
        end = entry.start_t + dataset.scan_period(entry.sensor)
        keyed.append((end, SENSORS.index(entry.sensor), i))
    keyed.sort()
    groups: List[Tuple[float, List[int]]] = []
    for end, _, i in keyed:
        if groups and end - groups[-1][0] <= TIME_TOLERANCE:
            groups[-1][1].append(i)
        else:
            groups.append((end, [i]))
    return groups


def scan_points(scan, dataset, config: PipelineConfig, threshold: Optional[float] = None) -> PointCloud:
    if isinstance(scan, LidarScanRecord):
        return lidar_to_points(scan, dataset.lidar_config, dataset.odometry)
    return scan_to_points(scan, dataset.radar_config, dataset.odometry,
                          threshold if threshold is not None else config.radar.detection_threshold)


class MapRunner:
    """Replays a dataset for one sensor, yielding a :class:`Frame` per scan of that sensor.

    With ``stack_times`` set, every scan is still integrated but only frames
    ending at one of those times build a stack and are yielded; frame
    indices keep counting the skipped ones.
    """

    def __init__(self, dataset, config: PipelineConfig, sensor: str = "radar",
                 threshold: Optional[float] = None,
                 stack_times: Optional[Sequence[float]] = None):
        if sensor not in SENSORS:
            raise ValueError(f"sensor must be one of {SENSORS}, got {sensor!r}")
        self.dataset = dataset
        config = config if threshold is None else config.with_threshold(threshold)
        if sensor == "lidar":
            # Lidar maps count hits only: every hit is solid, weights are hit counts.
            config = dataclasses.replace(config, grid=dataclasses.replace(config.grid, use_intensity=False))
        self.config = config
        self.sensor = sensor
        self.stack_times = None if stack_times is None else np.sort(np.asarray(stack_times, float))
        self.grid: Optional[VoxelGrid] = None

    def _wanted(self, t: float) -> bool:
        if self.stack_times is None:
            return True
        if len(self.stack_times) == 0:
            return False
        j = int(np.clip(np.searchsorted(self.stack_times, t), 1, len(self.stack_times) - 1)) \
            if len(self.stack_times) > 1 else 0
        near = self.stack_times[max(j - 1, 0):j + 1]
        return bool(np.any(np.abs(near - t) <= TIME_TOLERANCE))

    def frames(self) -> Iterator[Frame]:
        ds = self.dataset
        groups = replay_groups(ds)
        t_hi = ds.odometry.span[1]
        self.grid = VoxelGrid.centered_on(self.config.grid, ds.odometry.positions[0])
        count = 0
        for end, indices in groups:
            mine = [i for i in indices if ds.scans[i].sensor == self.sensor]
            scans = [ds.load_scan(i) for i in mine]
            tick = time.perf_counter()
            presented = integrated = 0
            for scan in scans:
                pts = scan_points(scan, ds, self.config)
                presented += len(pts)
                integrated += self.grid.integrate(pts)
            t_integrate = time.perf_counter()
            # A scan may end on the last odometry sample up to rounding.
            t_pose = t_hi if t_hi < end <= t_hi + TIME_TOLERANCE else end
            pos = interpolate_pose(ds.odometry, t_pose).position
            self.grid.recenter(pos)
            if not mine:
                continue
            if not self._wanted(end):
                count += 1
                continue
            stack = build_stack(self.grid, self.config.terrain)
            t_stack = time.perf_counter()
            yield Frame(
                index=count,
                t=end,
                sensor=self.sensor,
                position=pos,
                stack=stack,
                points_presented=presented,
                points_integrated=integrated,
                timing={
                    "integrate_ms": 1e3 * (t_integrate - tick),
                    "stack_ms": 1e3 * (t_stack - t_integrate),
                    "total_ms": 1e3 * (t_stack - tick),
                },
            )
            count += 1


def run_map(dataset, config: PipelineConfig, sensor: str = "radar",
            threshold: Optional[float] = None) -> List[Frame]:
    return list(MapRunner(dataset, config, sensor, threshold).frames())


def frame_times(dataset, sensor: str) -> List[float]:
    """End times of the frames a :class:`MapRunner` for ``sensor`` would yield."""
    return [end for end, idx in replay_groups(dataset)
            if any(dataset.scans[i].sensor == sensor for i in idx)]
