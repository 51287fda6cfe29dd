import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radmap.config import EvalOptions, GridConfig, LidarConfig, PipelineConfig, RadarConfig
from radmap.dataset_io import RasterMap
from radmap.errors import AlignmentError, EmptyInputError
from radmap.evaluation import (
    RangeHistogram,
    above_threshold,
    collect_points,
    detection_range,
    distance_to_bounds,
    effective_range,
    first_sustained,
    heightmap_diff,
    max_range,
    obstacle_in_bounds,
    pair_frames,
    range_histogram,
    write_diff_csv,
    write_histogram_csv,
    MapDiffSeries,
)
from radmap.radar_frontend import PointCloud
from radmap.simulator import Box, PlaneHeightfield, Scene, TrajectorySpec, simulate_run


def test_histogram_single_bin():
    h = range_histogram(np.array([0.5, 0.5, 0.5]))
    assert h.percentages.tolist() == [100.0]


def test_histogram_two_bins():
    h = range_histogram(np.array([0.5, 1.5]))
    assert h.percentages.tolist() == [50.0, 50.0]


def test_histogram_measures_from_each_origin():
    origins = np.array([[0.0, 0, 0], [10.0, 0, 0]])
    cloud = PointCloud(np.array([[0.5, 0, 0], [12.5, 0, 0]]), np.ones(2), np.zeros(2), origins)
    assert range_histogram(cloud).counts.tolist() == [1, 0, 1]


def test_histogram_empty():
    with pytest.raises(EmptyInputError):
        range_histogram(np.zeros(0))
    with pytest.raises(EmptyInputError):
        max_range(np.zeros(0))


def test_effective_range_examples():
    # Shares about 62 %, 37 % and 0.2 %: the last qualifying bin is index 1.
    h = RangeHistogram(1.0, [500, 300, 2])
    assert h.percentages[2] < 0.25
    assert effective_range(h) == 2.0
    assert effective_range(RangeHistogram(1.0, [1] * 1000)) == 0.0


def test_max_range_single_point():
    assert max_range(np.array([10.0])) == 10.0


def _raster(values, origin=(0.0, 0.0)):
    return RasterMap(np.asarray(values, dtype=np.float64), 0.4, origin)


def test_diff_identical():
    a = _raster([[1.0, 2.0], [np.nan, 3.0]])
    s = heightmap_diff(a, a)
    assert (s.mean_abs_error, s.std, s.compared, s.radar_only) == (0.0, 0.0, 3, 0)


def test_diff_population_statistics():
    s = heightmap_diff(_raster([[1.0, 0.0], [0.0, 0.0]]), _raster(np.zeros((2, 2))))
    assert s.mean_abs_error == pytest.approx(0.25)
    assert s.std == pytest.approx(math.sqrt(0.75 * 0.25), abs=1e-12)
    assert s.std == pytest.approx(0.4330, abs=5e-5)


def test_diff_lidar_invalid_everywhere():
    s = heightmap_diff(_raster([[1.0, np.nan], [2.0, 3.0]]), _raster(np.full((2, 2), np.nan)))
    assert s.compared == 0 and s.radar_only == 3


def test_diff_misaligned():
    with pytest.raises(AlignmentError, match="0.4"):
        heightmap_diff(_raster(np.zeros((2, 2))), _raster(np.zeros((2, 2)), origin=(0.4, 0.0)))


def test_pair_frames_by_time():
    assert pair_frames([(0, 0.25), (1, 0.5)], [(4, 0.25), (9, 0.5), (10, 0.55)]) == [(0, 4, 0.25), (1, 9, 0.5)]


def test_first_sustained():
    assert first_sustained([False, True, False, True, True], 2) == 3
    assert first_sustained([True, False, True], 2) is None
    assert first_sustained([True], 1) == 0


def test_obstacle_in_bounds_uses_cell_overlap():
    grid = np.zeros((4, 1))
    grid[1, 0] = 1.0  # cell spanning x in [0.4, 0.8)
    r = RasterMap.from_xy(grid, 0.4, (0.0, 0.0))
    assert obstacle_in_bounds(r, (0.7, 0.0, 2.0, 0.4))
    assert not obstacle_in_bounds(r, (0.8, 0.0, 2.0, 0.4))


def test_distance_to_bounds():
    assert distance_to_bounds((0.0, 0.0), (3.0, 4.0, 5.0, 6.0)) == pytest.approx(5.0)
    assert distance_to_bounds((4.0, 5.0), (3.0, 4.0, 5.0, 6.0)) == 0.0


def test_csv_outputs(tmp_path):
    write_histogram_csv(RangeHistogram(1.0, [1, 3]), tmp_path / "h.csv")
    assert (tmp_path / "h.csv").read_text().splitlines() == [
        "range_lo_m,range_hi_m,count,percent", "0,1,1,25.000000", "1,2,3,75.000000"]
    series = MapDiffSeries()
    series.append(0, 0.25, heightmap_diff(_raster([[1.0]]), _raster([[0.5]])))
    write_diff_csv(series, tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines()[1] == "0,0.250000,0.500000,0.000000,1,0"


hist_counts = st.lists(st.integers(0, 1000), min_size=1, max_size=60).filter(lambda c: sum(c) > 0)


@settings(max_examples=200, deadline=None)
@given(counts=hist_counts, f1=st.floats(0.0, 50.0), f2=st.floats(0.0, 50.0), width=st.floats(0.1, 5.0))
def test_effective_range_properties(counts, f1, f2, width):
    lo, hi = sorted((f1, f2))
    h = RangeHistogram(width, counts)
    assert h.percentages.sum() == pytest.approx(100.0, abs=1e-6)
    assert effective_range(h, hi) <= effective_range(h, lo)


@settings(max_examples=200, deadline=None)
@given(r=st.lists(st.floats(0.0, 300.0), min_size=1, max_size=200), width=st.floats(0.1, 5.0),
       floor=st.floats(0.0, 5.0))
def test_effective_range_bounded_by_max_range(r, width, floor):
    r = np.array(r)
    h = range_histogram(r, width)
    assert effective_range(h, floor) <= max_range(r) + width + 1e-9
    # Brute-force binning oracle.
    expected = np.zeros(len(h.counts), int)
    for v in r:
        expected[int(math.floor(v / width))] += 1
    np.testing.assert_array_equal(h.counts, expected)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_diff_self_is_zero(seed):
    rng = np.random.default_rng(seed)
    v = np.where(rng.random((6, 5)) < 0.3, np.nan, rng.normal(size=(6, 5)))
    a = _raster(v)
    s = heightmap_diff(a, a)
    assert (s.mean_abs_error, s.std, s.compared, s.radar_only) == (0.0, 0.0, int(np.sum(~np.isnan(v))), 0)


# -- small simulated runs ---------------------------------------------------------


def _small_config():
    return PipelineConfig(
        radar=RadarConfig(bin_count=400, azimuth_count=100),
        lidar=LidarConfig(channels=16, azimuth_count=256, max_range=20.0),
        grid=GridConfig(dims=(64, 64, 32)),
        eval=EvalOptions(sustain_frames=2),
    )


@pytest.fixture(scope="module")
def small_run():
    box = Box((6.0, 0.0), (1.0, 3.0, 4.0), reflectivity=0.9)
    far = Box((200.0, 0.0), (1.0, 3.0, 4.0), reflectivity=0.9)
    scene = Scene(PlaneHeightfield(0.0, bounds=(-50, -50, 250, 50)), [box, far], ground_backscatter=1.0)
    traj = TrajectorySpec(np.array([[0.0, 0.0], [2.5, 0.0]]))
    return simulate_run(scene, traj, _small_config())


def test_histogram_matches_brute_force_on_dataset(small_run):
    cfg = _small_config()
    cloud = collect_points(small_run, cfg, "radar")
    h = range_histogram(cloud)
    ranges = [math.dist(p, o) for p, o in zip(cloud.positions, cloud.origins)]
    expected = np.zeros(len(h.counts), int)
    for r in ranges:
        expected[int(r // 1.0)] += 1
    np.testing.assert_array_equal(h.counts, expected)
    strict = above_threshold(cloud, 0.31)
    assert len(strict) <= len(cloud)
    assert effective_range(range_histogram(strict)) <= effective_range(h) + 1.0


def test_detection_adjacent_and_out_of_map(small_run):
    near = (5.5, -1.5, 6.5, 1.5)
    far = (199.5, -1.5, 200.5, 1.5)
    cfg = _small_config()
    got = detection_range(small_run, near, cfg, sensors=("lidar",))
    assert got["lidar"] == pytest.approx(distance_to_bounds((0.0, 0.0), near), abs=0.5)
    assert detection_range(small_run, far, cfg) == {"radar": None, "lidar": None}
