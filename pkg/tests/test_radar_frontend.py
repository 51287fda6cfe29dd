import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radmap.config import LidarConfig, RadarConfig
from radmap.dataset_io import LidarScanRecord, Odometry, RadarScanRecord
from radmap.errors import ExtrapolationError
from radmap.geometry import quat_from_euler, quat_to_matrix
from radmap.radar_frontend import (
    PointCloud,
    bin_to_range,
    lidar_to_points,
    scan_to_points,
    threshold_scan,
)

from conftest import identity_quat, stationary_odometry

N_AZ, N_BIN = 400, 300


def _scan(intensities=None, start_t=0.0):
    inten = np.full((N_AZ, N_BIN), 0.1) if intensities is None else intensities
    return RadarScanRecord(
        start_t=start_t,
        bin_size=0.044,
        azimuth_offsets=np.arange(N_AZ) * (0.25 / N_AZ),
        angles=np.arange(N_AZ) * (2 * math.pi / N_AZ),
        intensities=inten,
    )


def _cfg(**kw):
    base = dict(bin_count=N_BIN, mount_translation=(0.0, 0.0, 1.0), mount_tilt=0.0)
    base.update(kw)
    return RadarConfig(**base)


def test_bin_to_range_center_convention():
    cfg = RadarConfig()
    assert bin_to_range(0, cfg) == pytest.approx(0.022)
    assert bin_to_range(227, cfg) == pytest.approx(10.01)
    with pytest.raises(IndexError):
        bin_to_range(cfg.bin_count, cfg)
    with pytest.raises(IndexError):
        bin_to_range(-1, cfg)


def test_threshold_all_below():
    assert len(threshold_scan(_scan(), 0.26)) == 0


def test_threshold_boundary_inclusive():
    inten = np.full((N_AZ, N_BIN), 0.1)
    inten[5, 7] = 0.31
    for thr in (0.26, 0.31):
        d = threshold_scan(_scan(inten), thr)
        assert len(d) == 1
        assert (d.azimuth[0], d.bin[0]) == (5, 7)
        assert d.intensity[0] == pytest.approx(0.31, abs=1e-7)


def test_threshold_matches_brute_force(rng):
    scan = _scan(rng.uniform(0, 1, (N_AZ, N_BIN)))
    d = threshold_scan(scan, 0.7)
    expected = [(a, b) for a in range(N_AZ) for b in range(N_BIN) if scan.intensities[a, b] >= np.float32(0.7)]
    assert list(zip(d.azimuth.tolist(), d.bin.tolist())) == expected


def test_threshold_rejects_out_of_range():
    with pytest.raises(ValueError):
        threshold_scan(_scan(), 1.0)


def _single(az, b, value=0.9):
    inten = np.full((N_AZ, N_BIN), 0.1)
    inten[az, b] = value
    return _scan(inten)


def test_stationary_zero_tilt_point():
    cloud = scan_to_points(_single(0, 227), _cfg(), stationary_odometry())
    np.testing.assert_allclose(cloud.positions, [[10.01, 0.0, 1.0]], atol=1e-9)
    assert cloud.intensity[0] == pytest.approx(0.9, abs=1e-7)


def test_down_tilt_lowers_forward_point():
    tilt = math.radians(2.5)
    cloud = scan_to_points(_single(0, 227), _cfg(mount_tilt=tilt), stationary_odometry())
    x, y, z = cloud.positions[0]
    assert 1.0 - z == pytest.approx(0.4367, abs=1e-4)
    assert 1.0 - z == pytest.approx(10.01 * math.sin(tilt), abs=1e-9)
    assert x == pytest.approx(10.01 * math.cos(tilt), abs=1e-9)
    assert y == pytest.approx(0.0, abs=1e-12)


def test_motion_compensation_half_rotation():
    odo = Odometry([0.0, 1.0], [[0, 0, 0], [1, 0, 0]], identity_quat(2))
    cloud = scan_to_points(_single(200, 227), _cfg(), odo)
    uncompensated = scan_to_points(_single(200, 227), _cfg(), stationary_odometry())
    assert cloud.t[0] == pytest.approx(0.125)
    np.testing.assert_allclose(cloud.positions[0] - uncompensated.positions[0], [0.125, 0, 0], atol=1e-6)


def test_odometry_gap_is_extrapolation_error():
    odo = Odometry([0.0, 0.1], [[0, 0, 0], [0, 0, 0]], identity_quat(2))
    with pytest.raises(ExtrapolationError):
        scan_to_points(_single(300, 10), _cfg(), odo)


def test_identity_pose_is_polar_to_cartesian(rng):
    scan = _scan(rng.uniform(0, 1, (N_AZ, N_BIN)))
    cfg = _cfg(mount_translation=(0.3, -0.2, 0.8))
    cloud = scan_to_points(scan, cfg, stationary_odometry())
    az, b = np.nonzero(scan.intensities >= np.float32(0.26))
    r = (b + 0.5) * 0.044
    theta = scan.angles[az].astype(np.float64)
    expected = np.column_stack([0.3 + r * np.cos(theta), -0.2 + r * np.sin(theta), np.full(len(r), 0.8)])
    np.testing.assert_allclose(cloud.positions, expected, atol=1e-9)
    assert np.all(cloud.intensity >= np.float32(0.26))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), t1=st.floats(0.01, 0.99), t2=st.floats(0.01, 0.99),
       yaw=st.floats(-3, 3), pitch=st.floats(-0.3, 0.3), tilt=st.floats(-0.5, 0.5))
def test_threshold_monotone_and_ranges_exact(seed, t1, t2, yaw, pitch, tilt):
    lo, hi = sorted((t1, t2))
    rng = np.random.default_rng(seed)
    scan = _scan(rng.uniform(0, 1, (N_AZ, N_BIN)))
    a = threshold_scan(scan, lo)
    b = threshold_scan(scan, hi)
    assert set(zip(b.azimuth.tolist(), b.bin.tolist())) <= set(zip(a.azimuth.tolist(), a.bin.tolist()))
    q = quat_from_euler([0.0, 0.1], [pitch, -pitch], [yaw, yaw + 0.5])
    odo = Odometry([0.0, 1.0], [[0, 0, 0], [1, 2, 0.5]], q)
    cloud = scan_to_points(scan, _cfg(mount_tilt=tilt), odo, threshold=hi)
    np.testing.assert_allclose(cloud.ranges(), (b.bin + 0.5) * 0.044, atol=1e-6)


def _lidar_scan(rng, n=50):
    pts = np.column_stack([np.sort(rng.uniform(0, 0.05, n)), rng.uniform(-20, 20, (n, 3)),
                           rng.uniform(0, 1, n)])
    return LidarScanRecord(0.0, pts)


def test_lidar_stationary_adds_mount(rng):
    scan = _lidar_scan(rng)
    cloud = lidar_to_points(scan, LidarConfig(), stationary_odometry())
    assert len(cloud) == len(scan.points)
    np.testing.assert_allclose(cloud.positions, scan.xyz + [0, 0, 1.2], atol=1e-12)


def test_lidar_moving_matches_pointwise_oracle(rng):
    scan = _lidar_scan(rng)
    q = quat_from_euler([0.0, 0.05], [0.0, 0.1], [0.2, 1.0])
    odo = Odometry([0.0, 0.05], [[1, 2, 3], [1.5, 2.2, 3.1]], q)
    mount = (0.1, 0.0, 1.2)
    cloud = lidar_to_points(scan, mount, odo)
    for i in range(len(scan.points)):
        pose = odo.pose_at(scan.times[i])
        rot = quat_to_matrix(pose.orientation)
        expected = pose.position + rot @ (scan.xyz[i] + np.array(mount))
        np.testing.assert_allclose(cloud.positions[i], expected, atol=1e-9)


def test_point_cloud_concat_and_empty():
    assert len(PointCloud.concat([])) == 0
    a = PointCloud(np.ones((2, 3)), np.ones(2), np.zeros(2), np.zeros((2, 3)))
    assert len(PointCloud.concat([a, PointCloud.empty(), a])) == 4
