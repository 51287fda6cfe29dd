"""Synthetic worlds: a ground heightfield plus boxes and vertical cylinders.

Scene JSON::

    {
      "ground": {"type": "plane", "z0": 0.0, "slope_x": 0.0, "slope_y": 0.0,
                 "bounds": [xmin, ymin, xmax, ymax]}
             or {"type": "grid", "origin": [x, y], "resolution": r,
                 "heights": [[row j = 0 (south)], ...]},
      "ground_backscatter": 6.0,     # radar clutter coefficient (constant-gamma)
      "ground_reflectivity": 0.3,    # lidar intensity of ground returns
      "objects": [
        {"type": "box", "center": [x, y], "yaw": 0.0, "size": [l, w, h],
         "reflectivity": 0.9, "transmissivity": 0.0, "base": null},
        {"type": "cylinder", "center": [x, y], "radius": r, "height": h,
         "reflectivity": 0.5, "transmissivity": 0.3, "base": null}
      ]
    }

``base`` is the world z of the object's bottom; null places it on the ground
at its center.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ConfigError

Bounds = Tuple[float, float, float, float]


class PlaneHeightfield:
    kind = "plane"

    def __init__(self, z0: float = 0.0, slope_x: float = 0.0, slope_y: float = 0.0,
                 bounds: Bounds = (-500.0, -500.0, 500.0, 500.0)):
        self.z0, self.slope_x, self.slope_y = float(z0), float(slope_x), float(slope_y)
        self.bounds = tuple(float(b) for b in bounds)
        if not (self.bounds[0] < self.bounds[2] and self.bounds[1] < self.bounds[3]):
            raise ConfigError(f"plane bounds must be [xmin, ymin, xmax, ymax], got {bounds}")

    def height(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        z = self.z0 + self.slope_x * x + self.slope_y * y
        return np.where(self.contains(x, y), z, np.nan)

    def contains(self, x, y) -> np.ndarray:
        xmin, ymin, xmax, ymax = self.bounds
        return (x >= xmin) & (x <= xmax) & (y >= ymin) & (y <= ymax)

    @property
    def max_height(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds
        corners = [self.z0 + self.slope_x * x + self.slope_y * y for x in (xmin, xmax) for y in (ymin, ymax)]
        return max(corners)

    def to_dict(self) -> dict:
        return {"type": "plane", "z0": self.z0, "slope_x": self.slope_x, "slope_y": self.slope_y,
                "bounds": list(self.bounds)}


class GridHeightfield:
    """Bilinear interpolation over node heights; ``heights[j][i]`` sits at origin + (i, j) * resolution."""

    kind = "grid"

    def __init__(self, origin, resolution: float, heights):
        self.origin = (float(origin[0]), float(origin[1]))
        self.resolution = float(resolution)
        self.heights = np.asarray(heights, dtype=np.float64)
        if self.heights.ndim != 2 or min(self.heights.shape) < 2:
            raise ConfigError("grid heights must be a 2-D array with at least 2x2 nodes")
        if self.resolution <= 0:
            raise ConfigError("grid resolution must be > 0")
        if not np.all(np.isfinite(self.heights)):
            raise ConfigError("grid heights must be finite")
        ny, nx = self.heights.shape
        self.bounds = (
            self.origin[0], self.origin[1],
            self.origin[0] + (nx - 1) * self.resolution,
            self.origin[1] + (ny - 1) * self.resolution,
        )

    def contains(self, x, y) -> np.ndarray:
        xmin, ymin, xmax, ymax = self.bounds
        return (x >= xmin) & (x <= xmax) & (y >= ymin) & (y <= ymax)

    def height(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        ny, nx = self.heights.shape
        fx = (x - self.origin[0]) / self.resolution
        fy = (y - self.origin[1]) / self.resolution
        inside = (fx >= 0) & (fx <= nx - 1) & (fy >= 0) & (fy <= ny - 1)
        if not (np.isfinite(fx).all() and np.isfinite(fy).all()):
            fx, fy = np.nan_to_num(fx), np.nan_to_num(fy)
        fx = np.clip(fx, 0, nx - 1)
        fy = np.clip(fy, 0, ny - 1)
        i = np.minimum(fx.astype(np.int64), nx - 2)
        j = np.minimum(fy.astype(np.int64), ny - 2)
        u, v = fx - i, fy - j
        h = self.heights
        z = (
            h[j, i] * (1 - u) * (1 - v)
            + h[j, i + 1] * u * (1 - v)
            + h[j + 1, i] * (1 - u) * v
            + h[j + 1, i + 1] * u * v
        )
        return np.where(inside, z, np.nan)

    @property
    def max_height(self) -> float:
        return float(self.heights.max())

    def to_dict(self) -> dict:
        return {"type": "grid", "origin": list(self.origin), "resolution": self.resolution,
                "heights": self.heights.tolist()}


Heightfield = Union[PlaneHeightfield, GridHeightfield]


@dataclass
class Box:
    center: Tuple[float, float]
    size: Tuple[float, float, float]
    yaw: float = 0.0
    reflectivity: float = 0.9
    transmissivity: float = 0.0
    base: Optional[float] = None

    kind = "box"

    def footprint_radius(self) -> float:
        return 0.5 * math.hypot(self.size[0], self.size[1])

    def corners(self) -> np.ndarray:
        l, w = self.size[0] / 2, self.size[1] / 2
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        local = np.array([[l, w], [-l, w], [-l, -w], [l, -w]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.asarray(self.center)

    def to_dict(self) -> dict:
        return {"type": "box", "center": list(self.center), "size": list(self.size), "yaw": self.yaw,
                "reflectivity": self.reflectivity, "transmissivity": self.transmissivity, "base": self.base}


@dataclass
class Cylinder:
    center: Tuple[float, float]
    radius: float
    height: float
    reflectivity: float = 0.5
    transmissivity: float = 0.0
    base: Optional[float] = None

    kind = "cylinder"

    def footprint_radius(self) -> float:
        return self.radius

    def to_dict(self) -> dict:
        return {"type": "cylinder", "center": list(self.center), "radius": self.radius,
                "height": self.height, "reflectivity": self.reflectivity,
                "transmissivity": self.transmissivity, "base": self.base}


Primitive = Union[Box, Cylinder]


def _check_primitive(obj: Primitive, i: int) -> None:
    rho, tau = obj.reflectivity, obj.transmissivity
    if not (0 <= rho <= 1 and 0 <= tau <= 1):
        raise ConfigError(f"object {i}: reflectivity and transmissivity must be in [0, 1]")
    if rho + tau > 1 + 1e-12:
        raise ConfigError(f"object {i}: reflectivity + transmissivity = {rho + tau} exceeds 1")
    sizes = obj.size if isinstance(obj, Box) else (obj.radius, obj.height)
    if any(s <= 0 for s in sizes):
        raise ConfigError(f"object {i}: sizes must be positive")


@dataclass
class Scene:
    ground: Heightfield
    objects: List[Primitive] = field(default_factory=list)
    ground_backscatter: float = 6.0
    ground_reflectivity: float = 0.3

    def __post_init__(self):
        for i, obj in enumerate(self.objects):
            _check_primitive(obj, i)
        if self.ground_backscatter < 0:
            raise ConfigError("ground_backscatter must be >= 0")
        if not 0 <= self.ground_reflectivity <= 1:
            raise ConfigError("ground_reflectivity must be in [0, 1]")

    @property
    def bounds(self) -> Bounds:
        return self.ground.bounds

    def contains(self, x, y) -> np.ndarray:
        return self.ground.contains(np.asarray(x), np.asarray(y))

    def object_base(self, obj: Primitive) -> float:
        if obj.base is not None:
            return float(obj.base)
        z = float(self.ground.height(obj.center[0], obj.center[1]))
        return 0.0 if math.isnan(z) else z

    def object_arrays(self) -> "ObjectArrays":
        return ObjectArrays.build(self)

    def to_dict(self) -> dict:
        return {
            "ground": self.ground.to_dict(),
            "ground_backscatter": self.ground_backscatter,
            "ground_reflectivity": self.ground_reflectivity,
            "objects": [o.to_dict() for o in self.objects],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scene":
        if not isinstance(data, dict) or "ground" not in data:
            raise ConfigError("scene: expected an object with a 'ground' entry")
        unknown = set(data) - {"ground", "objects", "ground_backscatter", "ground_reflectivity"}
        if unknown:
            raise ConfigError(f"scene: unknown keys {sorted(unknown)}")
        g = dict(data["ground"])
        kind = g.pop("type", None)
        try:
            if kind == "plane":
                ground = PlaneHeightfield(**g)
            elif kind == "grid":
                ground = GridHeightfield(**g)
            else:
                raise ConfigError(f"scene: unknown ground type {kind!r}")
        except TypeError as exc:
            raise ConfigError(f"scene.ground: {exc}") from None
        objects = []
        for i, o in enumerate(data.get("objects", [])):
            o = dict(o)
            kind = o.pop("type", None)
            try:
                if kind == "box":
                    o["center"] = tuple(o["center"])
                    o["size"] = tuple(o["size"])
                    objects.append(Box(**o))
                elif kind == "cylinder":
                    o["center"] = tuple(o["center"])
                    objects.append(Cylinder(**o))
                else:
                    raise ConfigError(f"scene.objects[{i}]: unknown type {kind!r}")
            except (TypeError, KeyError) as exc:
                raise ConfigError(f"scene.objects[{i}]: {exc}") from None
        return cls(
            ground=ground,
            objects=objects,
            ground_backscatter=float(data.get("ground_backscatter", 6.0)),
            ground_reflectivity=float(data.get("ground_reflectivity", 0.3)),
        )


def load_scene(path: Path) -> Scene:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return Scene.from_dict(data)


def save_scene(scene: Scene, path: Path) -> None:
    Path(path).write_text(json.dumps(scene.to_dict()) + "\n", encoding="utf-8")


@dataclass
class ObjectArrays:
    """Column arrays over all primitives, for vectorized casting."""

    is_box: np.ndarray
    cx: np.ndarray
    cy: np.ndarray
    yaw: np.ndarray
    half_l: np.ndarray
    half_w: np.ndarray
    radius: np.ndarray
    z_lo: np.ndarray
    z_hi: np.ndarray
    rho: np.ndarray
    tau: np.ndarray

    def __len__(self) -> int:
        return len(self.cx)

    @classmethod
    def build(cls, scene: Scene) -> "ObjectArrays":
        objs: Sequence[Primitive] = scene.objects
        n = len(objs)
        out = {k: np.zeros(n) for k in ("cx", "cy", "yaw", "half_l", "half_w", "radius",
                                         "z_lo", "z_hi", "rho", "tau")}
        is_box = np.zeros(n, dtype=bool)
        for i, o in enumerate(objs):
            base = scene.object_base(o)
            out["cx"][i], out["cy"][i] = o.center
            out["rho"][i], out["tau"][i] = o.reflectivity, o.transmissivity
            out["z_lo"][i] = base
            if isinstance(o, Box):
                is_box[i] = True
                out["yaw"][i] = o.yaw
                out["half_l"][i], out["half_w"][i] = o.size[0] / 2, o.size[1] / 2
                out["radius"][i] = o.footprint_radius()
                out["z_hi"][i] = base + o.size[2]
            else:
                out["radius"][i] = o.radius
                out["z_hi"][i] = base + o.height
        return cls(is_box=is_box, **out)

    def subset(self, mask: np.ndarray) -> "ObjectArrays":
        return ObjectArrays(**{k: getattr(self, k)[mask] for k in self.__dataclass_fields__})
