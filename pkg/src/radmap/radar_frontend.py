"""Polar radar sweeps and lidar scans to world-frame points.

Radar detections are the bins at or above the detection threshold.  Each one
becomes a single point on the beam axis at the bin-center range, projected
with the vehicle pose interpolated at that azimuth's own timestamp.  The
vehicle moves about 0.6 m during a 0.25 s sweep at 2.5 m/s, which is more
than a voxel, so a single pose per sweep is not good enough.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from .config import LidarConfig, RadarConfig
from .dataset_io import LidarScanRecord, Odometry, RadarScanRecord, interpolate_pose
from .geometry import quat_to_matrix, rot_y


class Detections(NamedTuple):
    azimuth: np.ndarray
    bin: np.ndarray
    intensity: np.ndarray

    def __len__(self) -> int:
        return len(self.azimuth)


@dataclass(eq=False)
class PointCloud:
    """World-frame points with the sensor origin each was observed from."""

    positions: np.ndarray
    intensity: np.ndarray
    t: np.ndarray
    origins: np.ndarray

    def __len__(self) -> int:
        return len(self.positions)

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3)), np.zeros(0), np.zeros(0), np.zeros((0, 3)))

    @classmethod
    def concat(cls, clouds: Sequence["PointCloud"]) -> "PointCloud":
        clouds = [c for c in clouds if len(c)]
        if not clouds:
            return cls.empty()
        return cls(
            np.concatenate([c.positions for c in clouds]),
            np.concatenate([c.intensity for c in clouds]),
            np.concatenate([c.t for c in clouds]),
            np.concatenate([c.origins for c in clouds]),
        )

    def ranges(self) -> np.ndarray:
        return np.linalg.norm(self.positions - self.origins, axis=1)


def bin_to_range(bin_index, config: RadarConfig):
    """Range of a bin center in meters."""
    idx = np.asarray(bin_index)
    if np.any((idx < 0) | (idx >= config.bin_count)):
        raise IndexError(f"bin index {bin_index} outside [0, {config.bin_count})")
    out = (idx + 0.5) * config.bin_size
    return float(out) if out.ndim == 0 else out


def threshold_scan(scan: RadarScanRecord, threshold: float) -> Detections:
    """All (azimuth, bin) cells with intensity >= threshold, azimuth-major order."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    az, b = np.nonzero(scan.intensities >= np.float32(threshold))
    return Detections(az, b, scan.intensities[az, b].astype(np.float64))


def radar_beam_axes(angles: np.ndarray, config: RadarConfig, positions, orientations):
    """Sensor origins and unit beam-axis directions in the world frame, one per azimuth."""
    rv = quat_to_matrix(orientations)
    mount = np.asarray(config.mount_translation, dtype=np.float64)
    origins = positions + rv @ mount
    angles = np.asarray(angles, dtype=np.float64)
    local = np.stack([np.cos(angles), np.sin(angles), np.zeros_like(angles)], axis=-1)
    vehicle = local @ rot_y(config.mount_tilt).T
    dirs = np.einsum("aij,aj->ai", rv, vehicle)
    return origins, dirs


def scan_to_points(
    scan: RadarScanRecord, config: RadarConfig, odometry: Odometry, threshold: float = None
) -> PointCloud:
    """Thresholded, motion-compensated radar points in the world frame."""
    threshold = config.detection_threshold if threshold is None else threshold
    dets = threshold_scan(scan, threshold)
    if len(dets) == 0:
        return PointCloud.empty()
    used = np.unique(dets.azimuth)
    times = scan.times[used]
    pose = interpolate_pose(odometry, times)
    origins, dirs = radar_beam_axes(scan.angles[used], config, pose.position, pose.orientation)
    # Map azimuth index -> row in the per-used-azimuth arrays.
    row = np.searchsorted(used, dets.azimuth)
    ranges = (dets.bin + 0.5) * scan.bin_size
    o = origins[row]
    pts = o + ranges[:, None] * dirs[row]
    return PointCloud(pts, dets.intensity, times[row], o)


def lidar_to_points(
    scan: LidarScanRecord, mount: Union[LidarConfig, Sequence[float]], odometry: Odometry
) -> PointCloud:
    """Lidar points transformed per point by the pose at its timestamp; nothing is filtered."""
    if len(scan.points) == 0:
        return PointCloud.empty()
    translation = mount.mount_translation if isinstance(mount, LidarConfig) else mount
    translation = np.asarray(translation, dtype=np.float64)
    times = scan.times
    uniq, inverse = np.unique(times, return_inverse=True)
    pose = interpolate_pose(odometry, uniq)
    rv = quat_to_matrix(pose.orientation)
    origins_u = pose.position + rv @ translation
    local = scan.xyz + translation
    pts = np.einsum("nij,nj->ni", rv[inverse], local) + pose.position[inverse]
    return PointCloud(pts, scan.intensity, times, origins_u[inverse])
