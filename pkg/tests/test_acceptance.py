"""Acceptance checks, one test per criterion; a summary line per criterion is printed at the end."""

import csv
import json
import time
from pathlib import Path

import numpy as np
import pytest

from radmap.cli import TIMING_HEADER, main
from radmap.config import GridConfig, LidarConfig, PipelineConfig, RadarConfig, TerrainConfig
from radmap.evaluation import (collect_points, detection_range, effective_range, height_error_series,
                               max_range, range_histogram)
from radmap.pipeline import MapRunner, scan_points
from radmap.radar_frontend import PointCloud, threshold_scan
from radmap.scenarios import (barrier_scenario, reference_route, reference_scene, undulating_config,
                              undulating_scenario)
from radmap.simulator import Box, PlaneHeightfield, Scene, save_scene, simulate_run
from radmap.terrain import cost_xy, ground_xy, obstacle_xy, slope_xy
from radmap.voxel_map import VoxelGrid

from oracles import cost_cell, ground_cell, obstacle_cell, slope_cell, solid_cells, voxel_dict


def _cloud(positions, intensity):
    n = len(positions)
    return PointCloud(positions, intensity, np.zeros(n), np.zeros((n, 3)))


# -- 1 -------------------------------------------------------------------

@pytest.mark.criterion(1)
def test_criterion_1_oracle_equivalence(record_property):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    tcfg = TerrainConfig(obstacle_height_threshold=0.8)
    cases = 0
    for trial in range(6):
        dims = (int(rng.integers(4, 17)), int(rng.integers(4, 17)), int(rng.integers(2, 9)))
        use_intensity = trial % 3 != 2
        grid = VoxelGrid(GridConfig(dims=dims, resolution=0.4, solid_intensity_threshold=0.3,
                                    use_intensity=use_intensity),
                         origin_index=(-dims[0] // 2, -dims[1] // 2, -1))
        n = int(rng.integers(1000, 10_001))
        # Leave some columns empty so validity and one-sided slopes are exercised.
        span = 0.4 * np.array(dims) * np.array([0.6, 0.6, 1.1])
        pos = grid.origin + rng.uniform(0, 1, (n, 3)) * span
        inten = rng.uniform(0, 1, n)
        grid.integrate(_cloud(pos, inten))

        cells, dropped = voxel_dict(pos, inten, grid.origin, grid.resolution, dims)
        hits = np.zeros(dims, np.int64)
        sums = np.zeros(dims)
        for idx, (h, s) in cells.items():
            hits[idx], sums[idx] = h, s
        np.testing.assert_array_equal(grid.hits, hits)
        np.testing.assert_allclose(grid.intensity_sum, sums, atol=1e-9, rtol=0)
        assert grid.dropped == dropped

        solid = np.zeros(dims, bool)
        for idx in solid_cells(cells, 0.3, use_intensity):
            solid[idx] = True
        np.testing.assert_array_equal(grid.solid_mask(), solid)

        z0 = grid.origin[2]
        g_oracle = [[ground_cell(cells, i, j, z0, 0.4, use_intensity) for j in range(dims[1])]
                    for i in range(dims[0])]
        ground, valid = ground_xy(grid)
        slope = slope_xy(ground, valid, 0.4)
        obstacle = obstacle_xy(grid, ground, tcfg.obstacle_height_threshold)
        cost = cost_xy(slope, obstacle, valid, tcfg)
        for i in range(dims[0]):
            for j in range(dims[1]):
                g = g_oracle[i][j]
                assert valid[i, j] == (g is not None)
                if g is not None:
                    assert abs(ground[i, j] - g) <= 1e-9
                s = slope_cell(g_oracle, i, j, 0.4)
                assert np.isnan(slope[i, j]) if s is None else abs(slope[i, j] - s) <= 1e-9
                o = obstacle_cell(cells, i, j, g, z0, 0.4, tcfg.obstacle_height_threshold, 0.3,
                                  use_intensity)
                assert bool(obstacle[i, j]) == o
                assert abs(cost[i, j] - cost_cell(s, o, g is not None, tcfg)) <= 1e-9
                cases += 1
    elapsed = time.perf_counter() - start
    record_property("columns", cases)
    record_property("runtime_s", round(elapsed, 2))
    assert elapsed < 10.0


# -- 2 -------------------------------------------------------------------

def _column_grid(weights_by_k, resolution=0.4):
    """A 1x1xK grid whose voxel k holds one point per unit hit with the given intensity."""
    nz = len(weights_by_k)
    grid = VoxelGrid(GridConfig(dims=(1, 1, nz), resolution=resolution))
    grid.hits[0, 0, :] = weights_by_k[:, 0]
    grid.intensity_sum[0, 0, :] = weights_by_k[:, 0] * weights_by_k[:, 1]
    return grid


@pytest.mark.criterion(2)
def test_criterion_2_ground_and_obstacle_properties(record_property):
    rng = np.random.default_rng(77)
    for _ in range(1000):
        nz = int(rng.integers(1, 33))
        occupied = rng.uniform(0, 1, nz) < 0.4
        occupied[rng.integers(nz)] = True
        hits = np.where(occupied, rng.integers(1, 20, nz), 0)
        inten = rng.uniform(0.01, 1.0, nz)
        grid = _column_grid(np.stack([hits, inten], axis=1))
        g, valid = ground_xy(grid)
        z = grid.z_centers()[occupied]
        assert valid[0, 0]
        assert z.min() - 1e-9 <= g[0, 0] <= z.max() + 1e-9
        scale = float(rng.uniform(0.01, 100.0))
        scaled = _column_grid(np.stack([hits, inten], axis=1))
        scaled.intensity_sum *= scale
        g2, _ = ground_xy(scaled)
        assert abs(g2[0, 0] - g[0, 0]) <= 1e-9
    for _ in range(100):
        dims = (int(rng.integers(2, 12)), int(rng.integers(2, 12)), int(rng.integers(2, 16)))
        grid = VoxelGrid(GridConfig(dims=dims, solid_intensity_threshold=0.3))
        n = int(rng.integers(1, 500))
        pos = grid.origin + rng.uniform(0, 1, (n, 3)) * 0.4 * np.array(dims)
        grid.integrate(_cloud(pos, rng.uniform(0, 1, n)))
        ground, _ = ground_xy(grid)
        lo, hi = sorted(rng.uniform(0.05, 0.4 * dims[2], 2))
        assert np.all(obstacle_xy(grid, ground, hi) <= obstacle_xy(grid, ground, lo))
    record_property("columns", 1000)
    record_property("grids", 100)


# -- 3 / 4 / 7: reference scene -----------------------------------------

def _cells(det, bins):
    return det.azimuth.astype(np.int64) * bins + det.bin


@pytest.fixture(scope="module")
def reference_run():
    """Simulate the reference drive and gather radar and lidar points.

    ``elapsed`` covers what criterion 3 needs (simulation, 0.26 radar points,
    lidar points, histograms); the 0.31 work is done outside the clock.
    """
    start = time.perf_counter()
    config = PipelineConfig()
    run = simulate_run(reference_scene(), reference_route(), config)
    bins = config.radar.bin_count
    radar26, radar31, lidar = [], [], []
    subset_ok = True
    outside = 0.0
    for i, entry in enumerate(run.scans):
        scan = run.load_scan(i)
        if entry.sensor == "lidar":
            lidar.append(scan_points(scan, run, config))
            continue
        radar26.append(scan_points(scan, run, config, 0.26))
        tick = time.perf_counter()
        d26, d31 = threshold_scan(scan, 0.26), threshold_scan(scan, 0.31)
        subset_ok &= bool(np.all(np.isin(_cells(d31, bins), _cells(d26, bins))))
        radar31.append(scan_points(scan, run, config, 0.31))
        outside += time.perf_counter() - tick
    result = {
        "run": run,
        "config": config,
        "radar26": PointCloud.concat(radar26),
        "radar31": PointCloud.concat(radar31),
        "lidar": PointCloud.concat(lidar),
        "subset_ok": subset_ok,
        "radar_scans": len(radar26),
    }
    result["hist26"] = range_histogram(result["radar26"])
    result["hist_lidar"] = range_histogram(result["lidar"])
    result["elapsed"] = time.perf_counter() - start - outside
    return result


@pytest.mark.criterion(3)
def test_criterion_3_range_advantage(reference_run, record_property):
    eff_r = effective_range(reference_run["hist26"])
    eff_l = effective_range(reference_run["hist_lidar"])
    max_r = max_range(reference_run["radar26"])
    max_l = max_range(reference_run["lidar"])
    for k, v in (("eff_radar_m", eff_r), ("eff_lidar_m", eff_l), ("ratio", eff_r / eff_l),
                 ("max_radar_m", max_r), ("max_lidar_m", max_l), ("runtime_s", reference_run["elapsed"])):
        record_property(k, round(v, 2))
    assert eff_r / eff_l >= 2.0
    assert max_r > 200.0
    assert max_l <= 50.0
    assert reference_run["elapsed"] < 60.0


@pytest.mark.criterion(4)
def test_criterion_4_threshold_ordering(reference_run, record_property):
    eff26 = effective_range(reference_run["hist26"])
    eff31 = effective_range(range_histogram(reference_run["radar31"]))
    record_property("scans", reference_run["radar_scans"])
    record_property("eff_0.26_m", round(eff26, 2))
    record_property("eff_0.31_m", round(eff31, 2))
    assert reference_run["subset_ok"]
    assert eff31 <= eff26
    assert eff26 >= 50.0 - 1.0 and eff31 >= 50.0 - 1.0


@pytest.mark.criterion(7)
def test_criterion_7_realtime_budget(reference_run, record_property, tmp_path_factory):
    config = reference_run["config"]
    assert config.grid.dims == (256, 256, 64)
    out = tmp_path_factory.mktemp("timing") / "timing.csv"
    totals = []
    with out.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TIMING_HEADER)
        for frame in MapRunner(reference_run["run"], config, "radar").frames():
            writer.writerow([frame.index, repr(frame.t)] + [f"{frame.timing[k]:.3f}" for k in TIMING_HEADER[2:]])
            totals.append(frame.timing["total_ms"])
    median = float(np.median(totals))
    print(f"timing CSV: {out}")
    print(out.read_text())
    record_property("frames", len(totals))
    record_property("median_ms", round(median, 1))
    record_property("max_ms", round(max(totals), 1))
    record_property("csv", str(out))
    assert median <= 250.0


# -- 5 -------------------------------------------------------------------

@pytest.mark.criterion(5)
def test_criterion_5_barrier_detection(record_property):
    scene, trajectory, bounds = barrier_scenario()
    config = PipelineConfig()
    found = detection_range(simulate_run(scene, trajectory, config), bounds, config)
    record_property("radar_m", None if found["radar"] is None else round(found["radar"], 2))
    record_property("lidar_m", None if found["lidar"] is None else round(found["lidar"], 2))
    assert found["radar"] is not None and found["lidar"] is not None
    assert found["radar"] >= 2.0 * found["lidar"]
    assert found["radar"] >= 60.0


# -- 6 -------------------------------------------------------------------

@pytest.mark.criterion(6)
def test_criterion_6_height_map_accuracy(record_property):
    scene, trajectory = undulating_scenario()
    config = undulating_config(PipelineConfig())
    series = height_error_series(simulate_run(scene, trajectory, config), config)
    mae, std = series.mean_abs_error, series.std
    frac = float(np.mean(mae <= 0.3))
    record_property("frames", len(series))
    record_property("max_mae_m", round(float(mae.max()), 3))
    record_property("frac_le_0.3", round(frac, 3))
    record_property("max_std_m", round(float(std.max()), 3))
    assert trajectory.total_time >= 60.0
    assert np.all(mae <= 0.4)
    assert frac >= 0.7
    assert np.all(std <= 0.4)


# -- 8 -------------------------------------------------------------------

def _full_run(root: Path, inputs: Path) -> None:
    scene, route, cfg = (str(inputs / n) for n in ("scene.json", "route.csv", "config.json"))
    ds = str(root / "ds")
    steps = [
        ["sim", "gen", "--scene", scene, "--trajectory", route, "--config", cfg, "--seed", "5", "--out", ds],
        ["map", "run", "--dataset", ds, "--config", cfg, "--out", str(root / "radar")],
        ["map", "run", "--dataset", ds, "--config", cfg, "--sensor", "lidar", "--out", str(root / "lidar")],
        ["eval", "hist", "--dataset", ds, "--config", cfg, "--out", str(root / "hist"), "--svg"],
        ["eval", "diff", "--radar", str(root / "radar"), "--lidar", str(root / "lidar"),
         "--out", str(root / "diff"), "--svg"],
        ["eval", "detect", "--radar", str(root / "radar"), "--lidar", str(root / "lidar"),
         "--bounds", "11.5", "-2", "12.5", "2", "--out", str(root / "detect")],
    ]
    for argv in steps:
        assert main(argv) == 0, argv


def _artifacts(root: Path):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.name != "timing.csv"}


@pytest.mark.criterion(8)
def test_criterion_8_determinism(tmp_path, record_property, capsys):
    inputs = tmp_path / "inputs"
    inputs.mkdir()
    scene = Scene(PlaneHeightfield(0.0, bounds=(-40, -40, 40, 40)),
                  [Box((12.0, 0.0), (1.0, 4.0, 2.0), reflectivity=0.9),
                   Box((4.0, 6.0), (3.0, 3.0, 3.0), reflectivity=0.1, transmissivity=0.8)],
                  ground_backscatter=3.0)
    save_scene(scene, inputs / "scene.json")
    (inputs / "route.csv").write_text("x,y\n0,0\n2.5,0\n")
    config = PipelineConfig(radar=RadarConfig(bin_count=500, azimuth_count=80),
                            lidar=LidarConfig(channels=8, azimuth_count=128, max_range=20.0),
                            grid=GridConfig(dims=(64, 64, 32)))
    (inputs / "config.json").write_text(json.dumps(config.to_dict()))
    _full_run(tmp_path / "a", inputs)
    _full_run(tmp_path / "b", inputs)
    capsys.readouterr()
    a, b = _artifacts(tmp_path / "a"), _artifacts(tmp_path / "b")
    record_property("files", len(a))
    assert sorted(a) == sorted(b)
    differing = [name for name in a if a[name] != b[name]]
    record_property("differing", len(differing))
    assert not differing
