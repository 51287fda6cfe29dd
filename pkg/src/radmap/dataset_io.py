"""On-disk dataset and raster formats, plus odometry pose interpolation.

Dataset directory layout::

    manifest.json        version, sensor configs, scan index, odometry path
    odometry.csv         t,x,y,z,qw,qx,qy,qz (world frame, shortest-repr floats)
    radar/NNNNNN.bin     one file per radar sweep
    lidar/NNNNNN.bin     one file per lidar scan

Radar scan file (little-endian)::

    b"RMRS"  u32 version  u32 azimuth_count  u32 bin_count  f64 start_t  f64 bin_size
    azimuth_count rows of f32: [time offset from start_t, angle, bin intensities...]

Lidar scan file (little-endian)::

    b"RMLS"  u32 version  u32 point_count  u32 reserved  f64 start_t
    point_count rows of f32: [time offset from start_t, x, y, z, intensity]

Rasters are a JSON header next to a raw payload of little-endian float32
values, row-major with row 0 at the north (max y) edge.  ``origin`` is the
world (x, y) of the south-west map corner, which is the corner of the cell in
the last row and first column.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .config import LidarConfig, RadarConfig
from .errors import ConfigError, ExtrapolationError, FormatError
from .geometry import quat_normalize, slerp

DATASET_VERSION = 1
RASTER_VERSION = 1
SUPPORTED_VERSIONS = (1,)

_RADAR_MAGIC = b"RMRS"
_LIDAR_MAGIC = b"RMLS"
_RADAR_HEADER = struct.Struct("<4sIIIdd")
_LIDAR_HEADER = struct.Struct("<4sIIId")
_ODOM_COLUMNS = ["t", "x", "y", "z", "qw", "qx", "qy", "qz"]


# --------------------------------------------------------------------------
# Odometry


@dataclass(frozen=True)
class OdometrySample:
    t: float
    position: Tuple[float, float, float]
    orientation: Tuple[float, float, float, float]


class Pose(NamedTuple):
    position: np.ndarray
    orientation: np.ndarray


class Odometry:
    """Time-ordered odometry held as column arrays."""

    def __init__(self, t, positions, orientations, validate: bool = True):
        self.t = np.ascontiguousarray(t, dtype=np.float64)
        self.positions = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
        self.orientations = np.ascontiguousarray(orientations, dtype=np.float64).reshape(-1, 4)
        if validate:
            self.validate()

    def validate(self) -> None:
        n = len(self.t)
        if len(self.positions) != n or len(self.orientations) != n:
            raise FormatError("odometry column lengths differ")
        if n == 0:
            raise FormatError("odometry is empty")
        if np.any(np.diff(self.t) <= 0):
            i = int(np.argmax(np.diff(self.t) <= 0))
            raise FormatError(f"odometry timestamps not strictly increasing at row {i + 1}")
        norms = np.linalg.norm(self.orientations, axis=1)
        bad = np.abs(norms - 1.0) > 1e-6
        if np.any(bad):
            raise FormatError(f"odometry quaternion at row {int(np.argmax(bad))} is not unit norm")
        if not (np.all(np.isfinite(self.t)) and np.all(np.isfinite(self.positions))):
            raise FormatError("odometry contains non-finite values")

    @classmethod
    def from_samples(cls, samples: Sequence[OdometrySample]) -> "Odometry":
        return cls(
            [s.t for s in samples],
            [s.position for s in samples],
            [s.orientation for s in samples],
        )

    def samples(self) -> List[OdometrySample]:
        return [
            OdometrySample(float(t), tuple(map(float, p)), tuple(map(float, q)))
            for t, p, q in zip(self.t, self.positions, self.orientations)
        ]

    def __len__(self) -> int:
        return len(self.t)

    @property
    def span(self) -> Tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])

    def pose_at(self, t) -> Pose:
        return interpolate_pose(self, t)


def interpolate_pose(odometry: Union[Odometry, Sequence[OdometrySample]], t) -> Pose:
    """Pose at time ``t`` (scalar or array).

    Position is linearly interpolated between the bracketing samples and
    orientation follows the shortest great-circle arc.  A query that hits a
    sample timestamp returns that sample exactly.
    """
    if not isinstance(odometry, Odometry):
        odometry = Odometry.from_samples(odometry)
    ts = odometry.t
    tq = np.asarray(t, dtype=np.float64)
    scalar = tq.ndim == 0
    tq = np.atleast_1d(tq)
    lo, hi = ts[0], ts[-1]
    outside = (tq < lo) | (tq > hi) | ~np.isfinite(tq)
    if np.any(outside):
        raise ExtrapolationError(float(tq[np.argmax(outside)]), float(lo), float(hi))

    if len(ts) == 1:
        pos = np.repeat(odometry.positions, len(tq), axis=0)
        quat = np.repeat(odometry.orientations, len(tq), axis=0)
    else:
        i = np.clip(np.searchsorted(ts, tq, side="right") - 1, 0, len(ts) - 2)
        t0, t1 = ts[i], ts[i + 1]
        u = (tq - t0) / (t1 - t0)
        p0, p1 = odometry.positions[i], odometry.positions[i + 1]
        pos = p0 + u[:, None] * (p1 - p0)
        quat = slerp(odometry.orientations[i], odometry.orientations[i + 1], u)
        exact0 = u == 0.0
        exact1 = u == 1.0
        pos[exact0] = p0[exact0]
        quat[exact0] = odometry.orientations[i][exact0]
        pos[exact1] = p1[exact1]
        quat[exact1] = odometry.orientations[i + 1][exact1]

    if scalar:
        return Pose(pos[0], quat[0])
    return Pose(pos, quat)


def write_odometry(odometry: Odometry, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(_ODOM_COLUMNS) + "\n")
        rows = np.column_stack([odometry.t, odometry.positions, odometry.orientations])
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_odometry(path: Path) -> Odometry:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"odometry file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _ODOM_COLUMNS:
            raise FormatError(f"{path}: expected header {','.join(_ODOM_COLUMNS)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 8:
                raise FormatError(f"{path}:{lineno}: expected 8 columns, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric value") from None
    data = np.array(rows, dtype=np.float64).reshape(-1, 8)
    try:
        return Odometry(data[:, 0], data[:, 1:4], data[:, 4:8])
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


# --------------------------------------------------------------------------
# Scan records


@dataclass(eq=False)
class RadarScanRecord:
    """One 360 degree polar sweep.

    ``azimuth_offsets`` are seconds after ``start_t``; angles are in the
    sensor frame; ``intensities`` has shape (azimuth_count, bin_count).
    """

    start_t: float
    bin_size: float
    azimuth_offsets: np.ndarray
    angles: np.ndarray
    intensities: np.ndarray

    def __post_init__(self):
        self.start_t = float(self.start_t)
        self.bin_size = float(self.bin_size)
        self.azimuth_offsets = np.ascontiguousarray(self.azimuth_offsets, dtype="<f4")
        self.angles = np.ascontiguousarray(self.angles, dtype="<f4")
        self.intensities = np.ascontiguousarray(self.intensities, dtype="<f4")
        if self.intensities.ndim != 2:
            raise FormatError("radar intensities must be 2-D (azimuth, bin)")

    @property
    def azimuth_count(self) -> int:
        return self.intensities.shape[0]

    @property
    def bin_count(self) -> int:
        return self.intensities.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.start_t + self.azimuth_offsets.astype(np.float64)

    def validate(self, rotation_period: Optional[float] = None, name: str = "radar scan") -> None:
        a = self.azimuth_count
        if len(self.azimuth_offsets) != a or len(self.angles) != a:
            raise FormatError(f"{name}: azimuth arrays disagree with intensity rows")
        inten = self.intensities
        if not np.all(np.isfinite(inten)) or inten.min(initial=0.0) < 0 or inten.max(initial=0.0) > 1:
            bad = ~np.isfinite(inten) | (inten < 0) | (inten > 1)
            az, b = np.unravel_index(int(np.argmax(bad)), inten.shape)
            raise FormatError(
                f"{name}: intensity {float(inten[az, b])!r} at azimuth {az}, bin {b} outside [0, 1]"
            )
        if np.any(np.diff(self.azimuth_offsets) < 0):
            raise FormatError(f"{name}: azimuth timestamps decrease")
        if rotation_period is not None and a > 0:
            span = float(self.azimuth_offsets[-1]) - float(self.azimuth_offsets[0])
            if span > rotation_period + 1e-6:
                raise FormatError(f"{name}: azimuth span {span:.6f} s exceeds rotation period")
        if a > 1:
            steps = np.mod(np.diff(self.angles.astype(np.float64)), 2 * math.pi)
            if np.any(steps <= 0) or steps.sum() > 2 * math.pi + 1e-5:
                raise FormatError(f"{name}: azimuth angles not monotonic modulo 2*pi")

    def __eq__(self, other) -> bool:
        if not isinstance(other, RadarScanRecord):
            return NotImplemented
        return (
            self.start_t == other.start_t
            and self.bin_size == other.bin_size
            and self.azimuth_offsets.tobytes() == other.azimuth_offsets.tobytes()
            and self.angles.tobytes() == other.angles.tobytes()
            and self.intensities.shape == other.intensities.shape
            and self.intensities.tobytes() == other.intensities.tobytes()
        )


@dataclass(eq=False)
class LidarScanRecord:
    """One lidar scan; ``points`` rows are (time offset, x, y, z, intensity) in the sensor frame."""

    start_t: float
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 5), "<f4"))

    def __post_init__(self):
        self.start_t = float(self.start_t)
        self.points = np.ascontiguousarray(self.points, dtype="<f4").reshape(-1, 5)

    @property
    def times(self) -> np.ndarray:
        return self.start_t + self.points[:, 0].astype(np.float64)

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, 1:4].astype(np.float64)

    @property
    def intensity(self) -> np.ndarray:
        return self.points[:, 4].astype(np.float64)

    def validate(self, rotation_period: Optional[float] = None, name: str = "lidar scan") -> None:
        if not np.all(np.isfinite(self.points)):
            raise FormatError(f"{name}: non-finite point values")
        dt = self.points[:, 0]
        if len(dt) and (dt.min() < 0 or (rotation_period is not None and dt.max() > rotation_period + 1e-6)):
            raise FormatError(f"{name}: point timestamps outside the scan period")
        inten = self.points[:, 4]
        if len(inten) and (inten.min() < 0 or inten.max() > 1):
            raise FormatError(f"{name}: intensity outside [0, 1]")

    def __eq__(self, other) -> bool:
        if not isinstance(other, LidarScanRecord):
            return NotImplemented
        return self.start_t == other.start_t and self.points.tobytes() == other.points.tobytes()


def write_radar_scan(record: RadarScanRecord, path: Path) -> None:
    header = _RADAR_HEADER.pack(
        _RADAR_MAGIC, DATASET_VERSION, record.azimuth_count, record.bin_count,
        record.start_t, record.bin_size,
    )
    rows = np.empty((record.azimuth_count, record.bin_count + 2), dtype="<f4")
    rows[:, 0] = record.azimuth_offsets
    rows[:, 1] = record.angles
    rows[:, 2:] = record.intensities
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rows.tobytes())


def read_radar_scan(path: Path, rotation_period: Optional[float] = None) -> RadarScanRecord:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"radar scan not found: {path}")
    data = path.read_bytes()
    if len(data) < _RADAR_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, n_az, n_bin, start_t, bin_size = _RADAR_HEADER.unpack_from(data)
    if magic != _RADAR_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version not in SUPPORTED_VERSIONS:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = n_az * (n_bin + 2) * 4
    payload = data[_RADAR_HEADER.size:]
    if len(payload) != expected:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, header implies {expected}")
    rows = np.frombuffer(payload, dtype="<f4").reshape(n_az, n_bin + 2)
    record = RadarScanRecord(start_t, bin_size, rows[:, 0], rows[:, 1], rows[:, 2:])
    record.validate(rotation_period, name=str(path))
    return record


def write_lidar_scan(record: LidarScanRecord, path: Path) -> None:
    header = _LIDAR_HEADER.pack(_LIDAR_MAGIC, DATASET_VERSION, len(record.points), 0, record.start_t)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(record.points.tobytes())


def read_lidar_scan(path: Path, rotation_period: Optional[float] = None) -> LidarScanRecord:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"lidar scan not found: {path}")
    data = path.read_bytes()
    if len(data) < _LIDAR_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, n, _, start_t = _LIDAR_HEADER.unpack_from(data)
    if magic != _LIDAR_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version not in SUPPORTED_VERSIONS:
        raise FormatError(f"{path}: unsupported version {version}")
    payload = data[_LIDAR_HEADER.size:]
    if len(payload) != n * 20:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, header implies {n * 20}")
    record = LidarScanRecord(start_t, np.frombuffer(payload, dtype="<f4").reshape(n, 5))
    record.validate(rotation_period, name=str(path))
    return record


# --------------------------------------------------------------------------
# Dataset manifest


class ScanEntry(NamedTuple):
    sensor: str
    path: str
    start_t: float


@dataclass
class DatasetManifest:
    version: int
    radar_config: RadarConfig
    lidar_config: LidarConfig
    scan_index: List[ScanEntry]
    odometry_path: str = "odometry.csv"

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "radar_config": self.radar_config.to_dict(),
            "lidar_config": self.lidar_config.to_dict(),
            "odometry": self.odometry_path,
            "scans": [{"sensor": e.sensor, "path": e.path, "start_t": e.start_t} for e in self.scan_index],
        }


class Dataset:
    """A dataset directory with odometry loaded and scans read on demand."""

    def __init__(self, root: Path, manifest: DatasetManifest, odometry: Odometry):
        self.root = Path(root)
        self.manifest = manifest
        self.odometry = odometry

    @property
    def scans(self) -> List[ScanEntry]:
        return self.manifest.scan_index

    @property
    def radar_config(self) -> RadarConfig:
        return self.manifest.radar_config

    @property
    def lidar_config(self) -> LidarConfig:
        return self.manifest.lidar_config

    def scan_period(self, sensor: str) -> float:
        cfg = self.radar_config if sensor == "radar" else self.lidar_config
        return cfg.rotation_period

    def load_scan(self, index: int):
        entry = self.scans[index]
        path = self.root / entry.path
        if entry.sensor == "radar":
            return read_radar_scan(path, self.radar_config.rotation_period)
        return read_lidar_scan(path, self.lidar_config.rotation_period)

    def __len__(self) -> int:
        return len(self.scans)


def read_dataset(root: Path, verify_scans: bool = False) -> Dataset:
    """Open a dataset directory.

    The manifest, odometry and scan-file existence are checked immediately;
    scan payloads are validated when loaded, or up front with ``verify_scans``.
    """
    root = Path(root)
    mpath = root / "manifest.json"
    if not mpath.exists():
        raise FileNotFoundError(f"manifest not found: {mpath}")
    try:
        raw = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{mpath}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    for key in ("version", "radar_config", "lidar_config", "odometry", "scans"):
        if key not in raw:
            raise FormatError(f"{mpath}: missing key {key!r}")
    if raw["version"] not in SUPPORTED_VERSIONS:
        raise FormatError(f"{mpath}: unsupported version {raw['version']}")
    try:
        radar_cfg = RadarConfig.from_dict(raw["radar_config"])
        lidar_cfg = LidarConfig.from_dict(raw["lidar_config"])
    except ConfigError as exc:
        raise FormatError(f"{mpath}: {exc}") from None

    entries = []
    for i, item in enumerate(raw["scans"]):
        try:
            entry = ScanEntry(str(item["sensor"]), str(item["path"]), float(item["start_t"]))
        except (KeyError, TypeError, ValueError):
            raise FormatError(f"{mpath}: malformed scan index entry {i}") from None
        if entry.sensor not in ("radar", "lidar"):
            raise FormatError(f"{mpath}: scan {i} has unknown sensor {entry.sensor!r}")
        if not (root / entry.path).exists():
            raise FileNotFoundError(f"scan file not found: {root / entry.path}")
        entries.append(entry)
    starts = [e.start_t for e in entries]
    if any(b < a for a, b in zip(starts, starts[1:])):
        raise FormatError(f"{mpath}: scan index not sorted by start time")

    odometry = read_odometry(root / raw["odometry"])
    manifest = DatasetManifest(raw["version"], radar_cfg, lidar_cfg, entries, raw["odometry"])
    dataset = Dataset(root, manifest, odometry)
    if verify_scans:
        for i in range(len(entries)):
            dataset.load_scan(i)
    return dataset


class DatasetWriter:
    """Streams scans into a new dataset directory; call :meth:`close` to write the manifest."""

    def __init__(self, root: Path, radar_config: RadarConfig, lidar_config: LidarConfig):
        self.root = Path(root)
        self.radar_config = radar_config
        self.lidar_config = lidar_config
        self.entries: List[ScanEntry] = []
        self._counts = {"radar": 0, "lidar": 0}
        (self.root / "radar").mkdir(parents=True, exist_ok=True)
        (self.root / "lidar").mkdir(parents=True, exist_ok=True)

    def add(self, record: Union[RadarScanRecord, LidarScanRecord]) -> None:
        sensor = "radar" if isinstance(record, RadarScanRecord) else "lidar"
        rel = f"{sensor}/{self._counts[sensor]:06d}.bin"
        self._counts[sensor] += 1
        if sensor == "radar":
            write_radar_scan(record, self.root / rel)
        else:
            write_lidar_scan(record, self.root / rel)
        self.entries.append(ScanEntry(sensor, rel, record.start_t))

    def close(self, odometry: Odometry) -> DatasetManifest:
        write_odometry(odometry, self.root / "odometry.csv")
        # Stable sort keeps insertion order for equal start times.
        entries = sorted(self.entries, key=lambda e: e.start_t)
        manifest = DatasetManifest(DATASET_VERSION, self.radar_config, self.lidar_config, entries)
        text = json.dumps(manifest.to_dict(), indent=1)
        (self.root / "manifest.json").write_text(text + "\n", encoding="utf-8")
        return manifest


def write_dataset(
    root: Path,
    radar_config: RadarConfig,
    lidar_config: LidarConfig,
    odometry: Odometry,
    scans: Iterable[Union[RadarScanRecord, LidarScanRecord]],
) -> DatasetManifest:
    writer = DatasetWriter(root, radar_config, lidar_config)
    for record in scans:
        writer.add(record)
    return writer.close(odometry)


# --------------------------------------------------------------------------
# Rasters


@dataclass(eq=False)
class RasterMap:
    """A north-up float32 raster; NaN marks cells without data."""

    values: np.ndarray
    resolution: float
    origin: Tuple[float, float]

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype="<f4")
        if self.values.ndim != 2:
            raise FormatError("raster values must be 2-D")
        self.resolution = float(self.resolution)
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_xy(cls, grid: np.ndarray, resolution: float, origin) -> "RasterMap":
        """Build from an array indexed ``[ix, iy]`` with (0, 0) at ``origin``."""
        grid = np.asarray(grid)
        return cls(grid.T[::-1], resolution, origin)

    @property
    def xy(self) -> np.ndarray:
        """View indexed ``[ix, iy]`` (x east, y north)."""
        return self.values[::-1].T

    def aligned_with(self, other: "RasterMap") -> bool:
        return (
            self.values.shape == other.values.shape
            and self.resolution == other.resolution
            and self.origin == other.origin
        )

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """World x and y of cell centers, both indexed ``[ix, iy]``."""
        ix = np.arange(self.width)
        iy = np.arange(self.height)
        x = self.origin[0] + (ix + 0.5) * self.resolution
        y = self.origin[1] + (iy + 0.5) * self.resolution
        return np.meshgrid(x, y, indexing="ij")

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterMap):
            return NotImplemented
        return self.aligned_with(other) and self.values.tobytes() == other.values.tobytes()


def _raster_paths(path: Path) -> Tuple[Path, Path]:
    path = Path(path)
    return path.with_suffix(".json"), path.with_suffix(".f32")


def write_raster(raster: RasterMap, path: Path) -> None:
    """Write ``<path>.json`` header and ``<path>.f32`` payload (suffix of ``path`` is replaced)."""
    header_path, payload_path = _raster_paths(path)
    values = raster.values
    if np.any(np.isinf(values)):
        raise FormatError("raster values must be finite or NaN")
    header = {
        "format": "radmap-raster",
        "version": RASTER_VERSION,
        "width": raster.width,
        "height": raster.height,
        "resolution": raster.resolution,
        "origin": list(raster.origin),
        "nodata": "NaN",
        "dtype": "float32-le",
        "order": "row-major-north-up",
    }
    header_path.write_text(json.dumps(header, indent=1) + "\n", encoding="utf-8")
    payload_path.write_bytes(values.tobytes())


def read_raster(path: Path) -> RasterMap:
    header_path, payload_path = _raster_paths(path)
    if not header_path.exists():
        raise FileNotFoundError(f"raster header not found: {header_path}")
    if not payload_path.exists():
        raise FileNotFoundError(f"raster payload not found: {payload_path}")
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
        width, height = int(header["width"]), int(header["height"])
        resolution = float(header["resolution"])
        origin = tuple(header["origin"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{header_path}: malformed header ({exc})") from None
    if header.get("version") != RASTER_VERSION:
        raise FormatError(f"{header_path}: unsupported version {header.get('version')}")
    payload = payload_path.read_bytes()
    if len(payload) != width * height * 4:
        raise FormatError(
            f"{payload_path}: {len(payload) // 4} cells in payload, header says {width * height}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    return RasterMap(values, resolution, origin)
