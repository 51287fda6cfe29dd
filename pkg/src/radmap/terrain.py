"""Ground, slope, obstacle, validity and cost rasters from a voxel grid."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from .config import TerrainConfig
from .dataset_io import RasterMap, read_raster, write_raster
from .voxel_map import VoxelGrid

LAYERS = ("ground", "slope", "obstacle", "validity", "cost")


@dataclass(eq=False)
class TerrainStack:
    ground: RasterMap
    slope: RasterMap
    obstacle: RasterMap
    validity: RasterMap
    cost: RasterMap

    def layers(self):
        return [(name, getattr(self, name)) for name in LAYERS]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TerrainStack):
            return NotImplemented
        return all(getattr(self, n) == getattr(other, n) for n in LAYERS)


def _raster(grid: VoxelGrid, values) -> RasterMap:
    return RasterMap.from_xy(values, grid.resolution, tuple(grid.origin[:2]))


def ground_xy(grid: VoxelGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Weighted mean voxel-center height per column, indexed [ix, iy], plus validity."""
    w = grid.weights()
    total = w.sum(axis=2)
    moment = w @ grid.z_centers()
    valid = total > 0
    ground = np.full(total.shape, np.nan)
    np.divide(moment, total, out=ground, where=valid)
    return ground, valid


def estimate_ground(grid: VoxelGrid) -> Tuple[RasterMap, RasterMap]:
    """Per-column ground height and validity.

    Each occupied voxel is weighted by mean intensity times hits (hits alone
    in hits-only mode).  A column is valid when its total weight is positive;
    invalid columns get NaN.
    """
    ground, valid = ground_xy(grid)
    return _raster(grid, ground), _raster(grid, valid.astype(np.float32))


def _axis_derivative(g: np.ndarray, valid: np.ndarray, axis: int, step: int, res: float) -> np.ndarray:
    n = g.shape[axis]
    plus = np.full(g.shape, np.nan)
    minus = np.full(g.shape, np.nan)
    sl_src = [slice(None)] * 2
    sl_dst = [slice(None)] * 2
    gm = np.where(valid, g, np.nan)
    if step < n:
        sl_src[axis], sl_dst[axis] = slice(step, n), slice(0, n - step)
        plus[tuple(sl_dst)] = gm[tuple(sl_src)]
        minus[tuple(sl_src)] = gm[tuple(sl_dst)]
    has_p = ~np.isnan(plus)
    has_m = ~np.isnan(minus)
    out = np.full(g.shape, np.nan)
    both = has_p & has_m
    out[both] = (plus[both] - minus[both]) / (2 * step * res)
    only_p = has_p & ~has_m
    out[only_p] = (plus[only_p] - gm[only_p]) / (step * res)
    only_m = has_m & ~has_p
    out[only_m] = (gm[only_m] - minus[only_m]) / (step * res)
    return out


def slope_xy(ground: np.ndarray, valid: np.ndarray, resolution: float, step: int = 1) -> np.ndarray:
    dx = _axis_derivative(ground, valid, 0, step, resolution)
    dy = _axis_derivative(ground, valid, 1, step, resolution)
    slope = np.arctan(np.hypot(dx, dy))
    slope[~valid] = np.nan
    return slope


def compute_slope(ground: RasterMap, validity: RasterMap, step: int = 1) -> RasterMap:
    """Slope angle in radians, arctan of the gradient magnitude.

    Central differences where both neighbors on an axis are valid, one-sided
    where only one is; NaN when an axis has no valid neighbor.
    """
    slope = slope_xy(ground.xy, validity.xy > 0, ground.resolution, step)
    return RasterMap.from_xy(slope, ground.resolution, ground.origin)


def obstacle_xy(grid: VoxelGrid, ground: np.ndarray, threshold: float) -> np.ndarray:
    solid = grid.solid_mask()
    any_solid = solid.any(axis=2)
    nz = grid.dims[2]
    top = nz - 1 - np.argmax(solid[:, :, ::-1], axis=2)
    top_z = grid.z_centers()[top]
    with np.errstate(invalid="ignore"):
        return any_solid & ~np.isnan(ground) & (top_z >= ground + threshold)


def detect_obstacles(grid: VoxelGrid, ground: RasterMap, threshold: float) -> RasterMap:
    """1 where some solid voxel center sits at least ``threshold`` above ground."""
    obstacle = obstacle_xy(grid, ground.xy, threshold)
    return _raster(grid, obstacle.astype(np.float32))


def cost_xy(slope: np.ndarray, obstacle: np.ndarray, valid: np.ndarray, config: TerrainConfig) -> np.ndarray:
    config.validate()
    sat = config.slope_saturation
    slope_term = np.where(np.isnan(slope), 0.0, np.minimum(slope, sat) / sat)
    cost = (
        config.slope_weight * config.slope_cost * slope_term
        + config.obstacle_weight * config.obstacle_cost * obstacle
    )
    return np.where(valid, cost, config.validity_weight * config.validity_cost)


def compute_cost(stack: TerrainStack, config: TerrainConfig) -> RasterMap:
    """Weighted sum of the validity penalty, saturated slope and obstacle maps.

    Invalid cells carry only the validity penalty.  A valid cell whose slope
    is undefined contributes no slope cost.
    """
    valid = stack.validity.xy > 0
    cost = cost_xy(stack.slope.xy.astype(np.float64), stack.obstacle.xy > 0, valid, config)
    return RasterMap.from_xy(cost, stack.validity.resolution, stack.validity.origin)


def build_stack(grid: VoxelGrid, config: TerrainConfig) -> TerrainStack:
    ground, valid = ground_xy(grid)
    slope = slope_xy(ground, valid, grid.resolution, config.slope_neighborhood)
    obstacle = obstacle_xy(grid, ground, config.obstacle_height_threshold)
    cost = cost_xy(slope, obstacle, valid, config)
    return TerrainStack(
        ground=_raster(grid, ground),
        slope=_raster(grid, slope),
        obstacle=_raster(grid, obstacle.astype(np.float32)),
        validity=_raster(grid, valid.astype(np.float32)),
        cost=_raster(grid, cost),
    )


def write_stack(stack: TerrainStack, directory: Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, raster in stack.layers():
        write_raster(raster, directory / f"{name}.f32")


def read_stack(directory: Path) -> TerrainStack:
    directory = Path(directory)
    return TerrainStack(**{name: read_raster(directory / f"{name}.f32") for name in LAYERS})
