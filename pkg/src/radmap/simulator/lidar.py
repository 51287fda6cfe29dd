"""Lidar model: thin rays, one return per ray at the nearest lidar-opaque surface.

Any object with transmissivity below 1 stops a lidar ray, including
vegetation that radar partly sees through.  Beam divergence is carried in
the config but rays are treated as infinitely thin.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..config import PipelineConfig
from ..dataset_io import LidarScanRecord, Pose
from ..geometry import quat_to_matrix
from .casting import intersect_terrain, ray_objects
from .scene import ObjectArrays, Scene


def column_offsets(config: PipelineConfig) -> np.ndarray:
    """Per-azimuth-column time offsets from the scan start (float32, as stored)."""
    n = config.lidar.azimuth_count
    return (np.arange(n) * (config.lidar.rotation_period / n)).astype(np.float32)


def sensor_rays(config: PipelineConfig) -> np.ndarray:
    """Unit ray directions in the sensor frame, shape (azimuths, channels, 3)."""
    lidar = config.lidar
    theta = np.arange(lidar.azimuth_count) * (2 * np.pi / lidar.azimuth_count)
    elev = np.asarray(lidar.channel_elevations())
    ce = np.cos(elev)
    return np.stack(
        [
            np.cos(theta)[:, None] * ce[None, :],
            np.sin(theta)[:, None] * ce[None, :],
            np.broadcast_to(np.sin(elev)[None, :], (len(theta), len(elev))),
        ],
        axis=-1,
    )


def lidar_ranges(scene: Scene, pose: Pose, config: PipelineConfig,
                 objects: Optional[ObjectArrays] = None):
    """Range per (column, channel) ray, inf for no return, plus the return intensity."""
    lidar = config.lidar
    n_col = lidar.azimuth_count
    pos = np.asarray(pose.position, dtype=np.float64)
    quat = np.asarray(pose.orientation, dtype=np.float64)
    if pos.ndim == 1:
        pos = np.broadcast_to(pos, (n_col, 3))
        quat = np.broadcast_to(quat, (n_col, 4))
    rot = quat_to_matrix(np.ascontiguousarray(quat))
    mount = np.asarray(lidar.mount_translation, dtype=np.float64)
    origin_col = pos + rot @ mount
    local = sensor_rays(config)
    world = np.einsum("aij,acj->aci", rot, local)
    n_ch = local.shape[1]
    origins = np.repeat(origin_col, n_ch, axis=0)
    dirs = world.reshape(-1, 3)
    rng_ground = intersect_terrain(scene.ground, origins, dirs, lidar.max_range)
    intensity = np.full(len(dirs), scene.ground_reflectivity)
    objs = objects if objects is not None else scene.object_arrays()
    if len(objs):
        centre = origin_col.mean(axis=0)
        d = np.hypot(objs.cx - centre[0], objs.cy - centre[1])
        spread = np.max(np.linalg.norm(origin_col[:, :2] - centre[:2], axis=1))
        objs = objs.subset((d - objs.radius <= lidar.max_range + spread) & (objs.tau < 1.0))
    if len(objs):
        rng_obj, which = ray_objects(origins, dirs, objs)
        nearer = rng_obj < rng_ground
        rng_ground = np.where(nearer, rng_obj, rng_ground)
        intensity[nearer] = objs.rho[which[nearer]]
    ranges = np.where(rng_ground <= lidar.max_range, rng_ground, np.inf)
    return ranges.reshape(n_col, n_ch), intensity.reshape(n_col, n_ch)


def simulate_lidar_scan(scene: Scene, pose: Pose, config: PipelineConfig,
                        rng: Optional[np.random.Generator] = None,
                        start_t: float = 0.0,
                        objects: Optional[ObjectArrays] = None) -> LidarScanRecord:
    """One lidar revolution; points are in the sensor frame, column-major by azimuth.

    The model is noise free, so ``rng`` is accepted for interface symmetry
    and not consumed.
    """
    ranges, intensity = lidar_ranges(scene, pose, config, objects)
    local = sensor_rays(config)
    hit = np.isfinite(ranges)
    dt = np.broadcast_to(column_offsets(config)[:, None], ranges.shape)
    xyz = local[hit] * ranges[hit][:, None]
    points = np.column_stack([dt[hit], xyz, np.clip(intensity[hit], 0.0, 1.0)])
    return LidarScanRecord(start_t=float(start_t), points=points)
