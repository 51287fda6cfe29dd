"""Rolling, vehicle-centered voxel grid with per-voxel hits and intensity sums.

Each voxel keeps an integer hit count and a float64 intensity sum.  The
mean intensity is derived from those two on demand, so integration order
does not matter.  The grid is anchored to a global voxel lattice: its origin
is always a whole multiple of the resolution, and recentering shifts the
data by whole voxels.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from .config import GridConfig
from .dataset_io import RasterMap
from .radar_frontend import PointCloud


class VoxelGrid:
    def __init__(self, config: GridConfig, origin_index=(0, 0, 0)):
        config.validate()
        self.config = config
        self.dims = tuple(int(d) for d in config.dims)
        self.resolution = float(config.resolution)
        self.origin_index = np.array(origin_index, dtype=np.int64)
        self.hits = np.zeros(self.dims, dtype=np.int32)
        self.intensity_sum = np.zeros(self.dims, dtype=np.float64)
        self.dropped = 0
        self.presented = 0
        self.integrations = 0
        self._last_hit = (
            np.zeros(self.dims, dtype=np.int32) if config.retention_scans is not None else None
        )

    @classmethod
    def centered_on(cls, config: GridConfig, position) -> "VoxelGrid":
        cell = np.floor(np.asarray(position, dtype=np.float64) / config.resolution).astype(np.int64)
        return cls(config, cell - np.array(config.dims) // 2)

    # -- geometry ---------------------------------------------------------

    @property
    def origin(self) -> np.ndarray:
        """World coordinates of the low corner of cell (0, 0, 0)."""
        return self.origin_index * self.resolution

    @property
    def center_index(self) -> np.ndarray:
        return np.array(self.dims) // 2

    def z_centers(self) -> np.ndarray:
        return self.origin[2] + (np.arange(self.dims[2]) + 0.5) * self.resolution

    def local_indices(self, positions) -> Tuple[np.ndarray, np.ndarray]:
        """Cell indices of ``positions`` (N, 3) and a mask of the ones inside the grid."""
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        idx = np.floor((positions - self.origin) / self.resolution).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < np.array(self.dims)), axis=1)
        return idx, inside

    # -- updates ----------------------------------------------------------

    def integrate(self, points: PointCloud) -> int:
        """Accumulate points; returns how many landed inside the grid."""
        n = len(points)
        self.presented += n
        self.integrations += 1
        if n == 0:
            self._apply_retention(np.zeros(0, dtype=np.int64))
            return 0
        idx, inside = self.local_indices(points.positions)
        self.dropped += int(n - inside.sum())
        flat = np.ravel_multi_index(idx[inside].T, self.dims)
        cells, inverse = np.unique(flat, return_inverse=True)
        counts = np.bincount(inverse, minlength=len(cells))
        sums = np.bincount(inverse, weights=points.intensity[inside], minlength=len(cells))
        self.hits.reshape(-1)[cells] += counts.astype(np.int32)
        self.intensity_sum.reshape(-1)[cells] += sums
        self._apply_retention(cells)
        return int(inside.sum())

    def _apply_retention(self, touched: np.ndarray) -> None:
        if self._last_hit is None:
            return
        last = self._last_hit.reshape(-1)
        last[touched] = self.integrations
        stale = (self.integrations - self._last_hit >= self.config.retention_scans) & (self.hits > 0)
        self.hits[stale] = 0
        self.intensity_sum[stale] = 0.0

    def shift(self, delta) -> None:
        """Move the grid origin by ``delta`` whole voxels.

        Data at local index i moves to i - delta; cells leaving the grid are
        discarded and newly exposed cells start empty.
        """
        delta = np.asarray(delta, dtype=np.int64)
        if not np.any(delta):
            return
        arrays = [self.hits, self.intensity_sum]
        if self._last_hit is not None:
            arrays.append(self._last_hit)
        shifted = []
        for arr in arrays:
            out = np.zeros_like(arr)
            src, dst = [], []
            for d, n in zip(delta, self.dims):
                if abs(d) >= n:
                    src = None
                    break
                src.append(slice(max(d, 0), n + min(d, 0)))
                dst.append(slice(max(-d, 0), n + min(-d, 0)))
            if src is not None:
                out[tuple(dst)] = arr[tuple(src)]
            shifted.append(out)
        self.hits, self.intensity_sum = shifted[0], shifted[1]
        if self._last_hit is not None:
            self._last_hit = shifted[2]
        self.origin_index = self.origin_index + delta

    def recenter(self, position) -> np.ndarray:
        """Shift so the vehicle stays within hysteresis of the central cell; returns the shift."""
        cell = np.floor((np.asarray(position, dtype=np.float64) - self.origin) / self.resolution)
        offset = cell.astype(np.int64) - self.center_index
        delta = np.where(np.abs(offset) > self.config.recenter_hysteresis, offset, 0)
        self.shift(delta)
        return delta

    # -- products ---------------------------------------------------------

    def mean_intensity(self) -> np.ndarray:
        out = np.zeros(self.dims, dtype=np.float64)
        np.divide(self.intensity_sum, self.hits, out=out, where=self.hits > 0)
        return out

    def solid_mask(self) -> np.ndarray:
        """Voxels with hits whose mean intensity meets the solid threshold (inclusive).

        The comparison is made at float32 precision, the precision the
        intensities were recorded at.  In hits-only mode any hit is solid.
        """
        occupied = self.hits > 0
        if not self.config.use_intensity:
            return occupied
        mean = self.mean_intensity().astype(np.float32)
        return occupied & (mean >= np.float32(self.config.solid_intensity_threshold))

    def weights(self) -> np.ndarray:
        """Ground-estimation weight per voxel: mean intensity times hits."""
        if self.config.use_intensity:
            return self.intensity_sum
        return self.hits.astype(np.float64)

    def copy(self) -> "VoxelGrid":
        other = VoxelGrid.__new__(VoxelGrid)
        other.__dict__.update(self.__dict__)
        other.origin_index = self.origin_index.copy()
        other.hits = self.hits.copy()
        other.intensity_sum = self.intensity_sum.copy()
        if self._last_hit is not None:
            other._last_hit = self._last_hit.copy()
        return other

    def slice_raster(self, k: int, field: str = "mean_intensity") -> RasterMap:
        """One z-slice as a raster, for debugging; empty voxels are NaN."""
        if field == "hits":
            layer = self.hits[:, :, k].astype(np.float64)
        elif field == "mean_intensity":
            layer = self.mean_intensity()[:, :, k]
        else:
            raise ValueError(f"unknown field {field!r}")
        layer = np.where(self.hits[:, :, k] > 0, layer, np.nan)
        return RasterMap.from_xy(layer, self.resolution, tuple(self.origin[:2]))


def world_to_index(grid: VoxelGrid, position) -> Optional[Tuple[int, int, int]]:
    """Local cell index owning ``position`` (half-open cells), or None outside the grid."""
    idx, inside = grid.local_indices(position)
    if not inside[0]:
        return None
    return tuple(int(v) for v in idx[0])


def solid_mask(grid: VoxelGrid) -> np.ndarray:
    return grid.solid_mask()


def integrate_points(grid: VoxelGrid, points: PointCloud) -> int:
    return grid.integrate(points)


def recenter(grid: VoxelGrid, position) -> np.ndarray:
    return grid.recenter(position)
