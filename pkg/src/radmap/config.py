"""Configuration records for every pipeline stage.

All angles are radians and all lengths meters.  Defaults reproduce the rig
used for the radar-only field runs: 400 azimuths, 0.044 m range bins, a 4 Hz
sweep, a 2.5 degree down-tilt, 0.4 m voxels in a 256x256x64 grid and a 0.26
detection threshold.  Mount offsets and cost weights are rig-specific
placeholders.

Each record converts to and from plain dicts; unknown keys are rejected so a
typo in a JSON config fails loudly instead of silently keeping a default.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Tuple, Type, TypeVar

from .errors import ConfigError

T = TypeVar("T")

Vec3 = Tuple[float, float, float]


def _from_dict(cls: Type[T], data: Any, where: str) -> T:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for name, value in data.items():
        f = known[name]
        sub = _NESTED.get((cls.__name__, name))
        if sub is not None:
            value = _from_dict(sub, value, f"{where}.{name}")
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    try:
        obj = cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    obj.validate()
    return obj


def _to_dict(obj) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if dataclasses.is_dataclass(value):
            value = _to_dict(value)
        elif isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out


class _Record:
    @classmethod
    def from_dict(cls: Type[T], data: Any) -> T:
        return _from_dict(cls, data, cls.__name__)

    def to_dict(self) -> dict:
        return _to_dict(self)

    def validate(self) -> None:
        pass


@dataclass(frozen=True)
class RadarConfig(_Record):
    azimuth_count: int = 400
    bin_count: int = 6000
    bin_size: float = 0.044
    detection_threshold: float = 0.26
    # Rig-specific: set to the sensor origin of the actual vehicle.
    mount_translation: Vec3 = (0.0, 0.0, 1.0)
    mount_tilt: float = math.radians(2.5)
    rotation_period: float = 0.25

    def validate(self) -> None:
        if not 0.0 < self.detection_threshold < 1.0:
            raise ConfigError(f"detection_threshold must be in (0, 1), got {self.detection_threshold}")
        if self.bin_size <= 0:
            raise ConfigError("bin_size must be > 0")
        if not -math.pi / 2 < self.mount_tilt < math.pi / 2:
            raise ConfigError("mount_tilt must be in (-pi/2, pi/2)")
        if self.azimuth_count < 1 or self.bin_count < 1:
            raise ConfigError("azimuth_count and bin_count must be positive")
        if self.rotation_period <= 0:
            raise ConfigError("rotation_period must be > 0")
        if len(self.mount_translation) != 3:
            raise ConfigError("mount_translation needs 3 components")

    @property
    def max_range(self) -> float:
        return self.bin_count * self.bin_size


@dataclass(frozen=True)
class LidarConfig(_Record):
    channels: int = 128
    azimuth_count: int = 1024
    fov_down: float = math.radians(-22.5)
    fov_up: float = math.radians(22.5)
    max_range: float = 50.0
    divergence: float = math.radians(0.18)
    rotation_period: float = 0.05
    # Rig-specific, like the radar mount.
    mount_translation: Vec3 = (0.0, 0.0, 1.2)

    def validate(self) -> None:
        if self.channels < 1 or self.azimuth_count < 1:
            raise ConfigError("channels and azimuth_count must be positive")
        if not self.fov_down <= self.fov_up:
            raise ConfigError("fov_down must not exceed fov_up")
        if self.max_range <= 0 or self.rotation_period <= 0:
            raise ConfigError("max_range and rotation_period must be > 0")
        if len(self.mount_translation) != 3:
            raise ConfigError("mount_translation needs 3 components")

    def channel_elevations(self):
        import numpy as np

        if self.channels == 1:
            return np.array([0.5 * (self.fov_down + self.fov_up)])
        return np.linspace(self.fov_down, self.fov_up, self.channels)


@dataclass(frozen=True)
class GridConfig(_Record):
    dims: Tuple[int, int, int] = (256, 256, 64)
    resolution: float = 0.4
    solid_intensity_threshold: float = 0.26
    # False: lidar mode, hits only; any hit is solid and weights are hit counts.
    use_intensity: bool = True
    recenter_hysteresis: int = 1
    # Clear voxels not hit during the last N integrations; None keeps everything.
    retention_scans: Optional[int] = None

    def validate(self) -> None:
        if len(self.dims) != 3 or any(int(d) <= 0 for d in self.dims):
            raise ConfigError(f"dims must be three positive integers, got {self.dims}")
        if self.resolution <= 0:
            raise ConfigError("resolution must be > 0")
        if not 0.0 <= self.solid_intensity_threshold <= 1.0:
            raise ConfigError("solid_intensity_threshold must be in [0, 1]")
        if self.recenter_hysteresis < 0:
            raise ConfigError("recenter_hysteresis must be >= 0")
        if self.retention_scans is not None and self.retention_scans < 1:
            raise ConfigError("retention_scans must be >= 1 or null")

    @property
    def side_length(self) -> float:
        return self.dims[0] * self.resolution


@dataclass(frozen=True)
class TerrainConfig(_Record):
    obstacle_height_threshold: float = 1.0
    slope_neighborhood: int = 1
    slope_saturation: float = math.radians(30.0)
    validity_weight: float = 1.0
    validity_cost: float = 20.0
    slope_weight: float = 1.0
    slope_cost: float = 50.0
    obstacle_weight: float = 1.0
    obstacle_cost: float = 100.0

    def validate(self) -> None:
        if self.obstacle_height_threshold <= 0:
            raise ConfigError("obstacle_height_threshold must be > 0")
        if self.slope_neighborhood < 1:
            raise ConfigError("slope_neighborhood must be >= 1")
        if self.slope_saturation <= 0:
            raise ConfigError("slope_saturation must be > 0")
        for name in ("validity_weight", "validity_cost", "slope_weight", "slope_cost",
                     "obstacle_weight", "obstacle_cost"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")


@dataclass(frozen=True)
class SimConfig(_Record):
    radar_azimuth_beamwidth: float = math.radians(0.9)
    radar_elevation_beamwidth: float = math.radians(1.8)
    noise_mean: float = 0.12
    noise_std: float = 0.04
    seed: int = 0
    speed: float = 2.5
    odometry_rate: float = 100.0
    waypoint_spacing: float = 20.0
    min_duration: float = 0.0

    def validate(self) -> None:
        if self.radar_azimuth_beamwidth <= 0 or self.radar_elevation_beamwidth <= 0:
            raise ConfigError("beamwidths must be > 0")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if self.speed <= 0:
            raise ConfigError("speed must be > 0")
        if self.odometry_rate <= 0:
            raise ConfigError("odometry_rate must be > 0")
        if self.min_duration < 0:
            raise ConfigError("min_duration must be >= 0")

    def check_noise_floor(self, threshold: float) -> None:
        if self.noise_mean + 3 * self.noise_std >= threshold:
            raise ConfigError(
                f"noise mean + 3 sd = {self.noise_mean + 3 * self.noise_std:.3f} "
                f"must stay below the detection threshold {threshold}"
            )


@dataclass(frozen=True)
class EvalOptions(_Record):
    bin_width: float = 1.0
    floor_pct: float = 0.25
    sustain_frames: int = 2
    svg: bool = False

    def validate(self) -> None:
        if self.bin_width <= 0:
            raise ConfigError("bin_width must be > 0")
        if self.sustain_frames < 1:
            raise ConfigError("sustain_frames must be >= 1")


@dataclass(frozen=True)
class PipelineConfig(_Record):
    radar: RadarConfig = field(default_factory=RadarConfig)
    lidar: LidarConfig = field(default_factory=LidarConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    terrain: TerrainConfig = field(default_factory=TerrainConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    eval: EvalOptions = field(default_factory=EvalOptions)

    def validate(self) -> None:
        self.sim.check_noise_floor(self.radar.detection_threshold)

    def with_threshold(self, threshold: float) -> "PipelineConfig":
        radar = dataclasses.replace(self.radar, detection_threshold=threshold)
        radar.validate()
        return dataclasses.replace(self, radar=radar)


_NESTED = {
    ("PipelineConfig", "radar"): RadarConfig,
    ("PipelineConfig", "lidar"): LidarConfig,
    ("PipelineConfig", "grid"): GridConfig,
    ("PipelineConfig", "terrain"): TerrainConfig,
    ("PipelineConfig", "sim"): SimConfig,
    ("PipelineConfig", "eval"): EvalOptions,
}


def load_config(path: Optional[Path]) -> PipelineConfig:
    """Read a pipeline config; ``None`` gives the defaults."""
    if path is None:
        return PipelineConfig()
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return PipelineConfig.from_dict(data)
