"""Synthetic radar and lidar datasets from parametric scenes."""

from .generate import SimulatedDataset, generate_dataset, scan_rng, simulate_run
from .lidar import simulate_lidar_scan
from .radar import radar_signal, simulate_radar_scan
from .scene import Box, Cylinder, GridHeightfield, PlaneHeightfield, Scene, load_scene, save_scene
from .trajectory import TrajectorySpec, build_odometry, load_trajectory, save_trajectory

__all__ = [
    "Box",
    "Cylinder",
    "GridHeightfield",
    "PlaneHeightfield",
    "Scene",
    "SimulatedDataset",
    "TrajectorySpec",
    "build_odometry",
    "generate_dataset",
    "load_scene",
    "load_trajectory",
    "radar_signal",
    "save_scene",
    "save_trajectory",
    "scan_rng",
    "simulate_lidar_scan",
    "simulate_radar_scan",
    "simulate_run",
]
