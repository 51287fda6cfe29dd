"""Built-in scenes and routes used by the examples and acceptance checks.

* reference: flat ground, a barrier and poles scattered out to 250 m.
* barrier: a diagonal approach on rolling ground to a tall barrier, with a
  belt of light vegetation that blocks lidar but passes most radar energy.
* undulating: a long drive over smooth random hills.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
from pathlib import Path
from typing import List, Tuple

import numpy as np

from .config import PipelineConfig
from .simulator.scene import Box, Cylinder, GridHeightfield, PlaneHeightfield, Scene, save_scene
from .simulator.trajectory import TrajectorySpec, save_trajectory

REFERENCE_BARRIER_CENTER = 40.5
REFERENCE_BARRIER = (40.0, -2.0, 41.0, 2.0)


def reference_scene(seed: int = 7, count: int = 10000, clearance: float = 52.0,
                    r_max: float = 250.0, pole_radius: Tuple[float, float] = (0.1, 0.2),
                    pole_reflectivity: Tuple[float, float] = (0.6, 0.9),
                    ground_backscatter: float = 1.2, route_half_length: float = 12.5,
                    rocks: int = 200, rock_band: Tuple[float, float] = (4.0, 60.0),
                    radial_power: float = 2.0) -> Scene:
    """Flat ground, a barrier ahead of the route, rocks near it and thin poles out to ``r_max``.

    Pole distance from the origin has density proportional to
    ``r ** radial_power`` (1 is uniform per unit area); poles are kept at
    least ``clearance`` meters from the route, beyond the lidar's reach.  Rocks
    sit within ``rock_band`` of the route and give strong close returns.
    """
    rng = np.random.default_rng(seed)
    objects = [Box(center=(REFERENCE_BARRIER_CENTER, 0.0), size=(1.0, 4.0, 1.5), reflectivity=0.9)]
    placed = 0
    while placed < rocks:
        x = rng.uniform(-route_half_length - rock_band[1], route_half_length + rock_band[1])
        y = rng.uniform(-rock_band[1], rock_band[1])
        gap = math.hypot(max(abs(x) - route_half_length, 0.0), y)
        if not rock_band[0] <= gap <= rock_band[1]:
            continue
        objects.append(Box(center=(x, y), size=(rng.uniform(1.0, 2.0), rng.uniform(1.0, 2.0),
                                                 rng.uniform(1.5, 2.5)),
                           yaw=rng.uniform(0, math.pi), reflectivity=rng.uniform(0.8, 0.9)))
        placed += 1
    xs, ys = [], []
    while len(xs) < count:
        r = r_max * rng.uniform(0.0, 1.0, 4 * count) ** (1.0 / (radial_power + 1.0))
        a = rng.uniform(0.0, 2 * math.pi, 4 * count)
        x, y = r * np.cos(a), r * np.sin(a)
        dx = np.maximum(np.abs(x) - route_half_length, 0.0)
        ok = np.hypot(dx, y) >= clearance
        xs.extend(x[ok])
        ys.extend(y[ok])
    xs, ys = np.array(xs[:count]), np.array(ys[:count])
    height = rng.uniform(6.0, 10.0, count)
    radius = rng.uniform(*pole_radius, count)
    rho = rng.uniform(*pole_reflectivity, count)
    for x, y, h, rad, p in zip(xs, ys, height, radius, rho):
        objects.append(Cylinder(center=(float(x), float(y)), radius=float(rad), height=float(h),
                                reflectivity=float(p)))
    ground = PlaneHeightfield(0.0, bounds=(-300.0, -300.0, 300.0, 300.0))
    return Scene(ground, objects, ground_backscatter=ground_backscatter)


def reference_route(duration: float = 10.0, speed: float = 2.5) -> TrajectorySpec:
    half = 0.5 * duration * speed
    return TrajectorySpec(np.array([[-half, 0.0], [half, 0.0]]), speed=speed)


def smooth_hills(seed: int, size: float, resolution: float, amplitude: float,
                 wavelength: float, origin: Tuple[float, float]) -> GridHeightfield:
    """Sum of a few random sinusoids sampled on a grid."""
    rng = np.random.default_rng(seed)
    n = int(round(size / resolution)) + 1
    x = origin[0] + np.arange(n) * resolution
    y = origin[1] + np.arange(n) * resolution
    gx, gy = np.meshgrid(x, y)
    z = np.zeros_like(gx)
    for _ in range(6):
        k = 2 * math.pi / (wavelength * rng.uniform(0.7, 1.4))
        theta = rng.uniform(0, 2 * math.pi)
        phase = rng.uniform(0, 2 * math.pi)
        z += np.sin(k * (gx * math.cos(theta) + gy * math.sin(theta)) + phase)
    z *= amplitude / 6 ** 0.5
    return GridHeightfield(origin, resolution, z)


def _rolling_grid(direction: np.ndarray, bounds: Tuple[float, float, float, float],
                  amplitude: float, wavelength: float, resolution: float = 1.0) -> GridHeightfield:
    """Ridges perpendicular to ``direction``: z = A sin(2 pi s / wavelength)."""
    xmin, ymin, xmax, ymax = bounds
    nx = int(math.ceil((xmax - xmin) / resolution)) + 1
    ny = int(math.ceil((ymax - ymin) / resolution)) + 1
    gx, gy = np.meshgrid(xmin + np.arange(nx) * resolution, ymin + np.arange(ny) * resolution)
    s = gx * direction[0] + gy * direction[1]
    return GridHeightfield((xmin, ymin), resolution, amplitude * np.sin(2 * math.pi * s / wavelength))


def barrier_scenario(start_distance: float = 90.0, end_distance: float = 15.0,
                     belt_distance: float = 28.0, amplitude: float = 0.2,
                     wavelength: float = 10.0, ground_backscatter: float = 3.0):
    """Diagonal approach to a 3 m barrier over rolling ground.

    A lidar-opaque, radar-transparent vegetation belt crosses the route
    ``belt_distance`` meters before the barrier.  Returns
    (scene, trajectory, barrier bounds).
    """
    u = np.array([1.0, 1.0]) / math.sqrt(2.0)
    start = np.zeros(2)
    barrier_c = start + start_distance * u
    yaw = math.pi / 4
    barrier = Box(center=tuple(barrier_c), size=(1.0, 6.0, 3.0), yaw=yaw, reflectivity=0.9)
    belt_c = barrier_c - belt_distance * u
    belt = Box(center=tuple(belt_c), size=(4.0, 80.0, 5.0), yaw=yaw, reflectivity=0.05,
               transmissivity=0.9)
    margin = 60.0
    bounds = (start[0] - margin, start[1] - margin, barrier_c[0] + margin, barrier_c[1] + margin)
    ground = _rolling_grid(u, bounds, amplitude, wavelength)
    scene = Scene(ground, [barrier, belt], ground_backscatter=ground_backscatter)
    end = start + (start_distance - end_distance) * u
    trajectory = TrajectorySpec(np.array([start, end]))
    corners = barrier.corners()
    box_bounds = (float(corners[:, 0].min()), float(corners[:, 1].min()),
                  float(corners[:, 0].max()), float(corners[:, 1].max()))
    return scene, trajectory, box_bounds


UNDULATING_SPEED = 4.0
UNDULATING_RADAR_MOUNT = (0.0, 0.0, 0.6)


def undulating_scenario(seed: int = 11, duration: float = 60.0, speed: float = UNDULATING_SPEED,
                        amplitude: float = 0.2, wavelength: float = 40.0,
                        ground_backscatter: float = 15.0):
    """Straight drive of ``duration`` seconds over smooth random hills, no objects.

    Returns (scene, trajectory).
    """
    length = duration * speed
    margin = 80.0
    size = length + 2 * margin
    origin = (-margin, -size / 2)
    ground = smooth_hills(seed, size, 1.0, amplitude, wavelength, origin)
    scene = Scene(ground, [], ground_backscatter=ground_backscatter)
    trajectory = TrajectorySpec(np.array([[0.0, 0.0], [length, 0.0]]), speed=speed)
    return scene, trajectory


def undulating_config(base: PipelineConfig) -> PipelineConfig:
    """``base`` with the low radar mount and route speed used for the undulating drive."""
    return dataclasses.replace(
        base,
        radar=dataclasses.replace(base.radar, mount_translation=UNDULATING_RADAR_MOUNT),
        sim=dataclasses.replace(base.sim, speed=UNDULATING_SPEED))


def export(out_dir: Path) -> List[Path]:
    """Write every built-in scene as JSON and its route as a waypoint CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scene, route, _ = barrier_scenario()
    items = [
        ("reference", reference_scene(), reference_route()),
        ("barrier", scene, route),
        ("undulating",) + tuple(undulating_scenario()),
    ]
    written = []
    for name, scene, route in items:
        save_scene(scene, out_dir / f"{name}_scene.json")
        save_trajectory(route, out_dir / f"{name}_route.csv")
        written += [out_dir / f"{name}_scene.json", out_dir / f"{name}_route.csv"]
    return written


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="export the built-in scenes and routes")
    parser.add_argument("out_dir", type=Path)
    out = parser.parse_args().out_dir
    for path in export(out):
        print(path)
    (out / "undulating.json").write_text(
        json.dumps(undulating_config(PipelineConfig()).to_dict(), indent=1) + "\n")
    print(out / "undulating.json")
