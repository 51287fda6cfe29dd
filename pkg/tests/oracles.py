"""Naive per-point and per-cell reference implementations."""

import math
from collections import defaultdict

import numpy as np


def voxel_dict(positions, intensities, origin, resolution, dims):
    """{(i, j, k): [hits, intensity_sum]} built one point at a time, plus the dropped count."""
    cells = defaultdict(lambda: [0, 0.0])
    dropped = 0
    for p, v in zip(positions, intensities):
        idx = tuple(int(math.floor((p[a] - origin[a]) / resolution)) for a in range(3))
        if all(0 <= idx[a] < dims[a] for a in range(3)):
            cells[idx][0] += 1
            cells[idx][1] += float(v)
        else:
            dropped += 1
    return dict(cells), dropped


def solid_cells(cells, threshold, use_intensity=True):
    out = set()
    for idx, (hits, total) in cells.items():
        if hits > 0 and (not use_intensity or np.float32(total / hits) >= np.float32(threshold)):
            out.add(idx)
    return out


def ground_cell(cells, ix, iy, z0, resolution, use_intensity=True):
    """Weighted mean voxel-center height of one column, or None."""
    num = den = 0.0
    for (i, j, k), (hits, total) in cells.items():
        if (i, j) != (ix, iy) or hits == 0:
            continue
        w = (total / hits) * hits if use_intensity else hits
        z = z0 + (k + 0.5) * resolution
        num += w * z
        den += w
    return num / den if den > 0 else None


def obstacle_cell(cells, ix, iy, ground, z0, resolution, threshold, solid_threshold, use_intensity=True):
    if ground is None:
        return False
    solid = solid_cells(cells, solid_threshold, use_intensity)
    for (i, j, k) in solid:
        if (i, j) == (ix, iy) and z0 + (k + 0.5) * resolution >= ground + threshold:
            return True
    return False


def slope_cell(g, ix, iy, resolution):
    """Central / one-sided differences per axis over valid (non-None) neighbours."""
    nx, ny = len(g), len(g[0])
    if g[ix][iy] is None:
        return None
    grads = []
    for dx, dy in ((1, 0), (0, 1)):
        def at(i, j):
            return g[i][j] if 0 <= i < nx and 0 <= j < ny else None
        plus, minus = at(ix + dx, iy + dy), at(ix - dx, iy - dy)
        if plus is not None and minus is not None:
            grads.append((plus - minus) / (2 * resolution))
        elif plus is not None:
            grads.append((plus - g[ix][iy]) / resolution)
        elif minus is not None:
            grads.append((g[ix][iy] - minus) / resolution)
        else:
            return None
    return math.atan(math.hypot(*grads))


def cost_cell(slope, obstacle, valid, cfg):
    if not valid:
        return cfg.validity_weight * cfg.validity_cost
    s = 0.0 if slope is None else min(slope, cfg.slope_saturation) / cfg.slope_saturation
    return cfg.slope_weight * cfg.slope_cost * s + cfg.obstacle_weight * cfg.obstacle_cost * (1.0 if obstacle else 0.0)
