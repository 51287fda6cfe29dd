import json
import math

import pytest

from radmap.config import GridConfig, PipelineConfig, RadarConfig, load_config
from radmap.errors import ConfigError


def test_defaults():
    cfg = PipelineConfig()
    assert cfg.radar.azimuth_count == 400
    assert cfg.radar.bin_size == 0.044
    assert cfg.radar.detection_threshold == 0.26
    assert cfg.radar.mount_tilt == pytest.approx(0.04363, abs=1e-5)
    assert cfg.grid.dims == (256, 256, 64) and cfg.grid.resolution == 0.4
    assert cfg.grid.solid_intensity_threshold == cfg.radar.detection_threshold
    assert cfg.lidar.azimuth_count == 1024 and cfg.lidar.max_range == 50.0
    assert cfg.sim.radar_azimuth_beamwidth == pytest.approx(math.radians(360 / 400))


def test_dict_round_trip(tmp_path):
    cfg = PipelineConfig()
    (tmp_path / "c.json").write_text(json.dumps(cfg.to_dict()))
    assert load_config(tmp_path / "c.json") == cfg


def test_partial_document_keeps_defaults(tmp_path):
    (tmp_path / "c.json").write_text('{"radar": {"detection_threshold": 0.31}}')
    cfg = load_config(tmp_path / "c.json")
    assert cfg.radar.detection_threshold == 0.31 and cfg.radar.bin_size == 0.044


@pytest.mark.parametrize("doc, match", [
    ('{"radar": {"bogus": 1}}', "bogus"),
    ('{"extra": {}}', "extra"),
    ('{"radar": {"detection_threshold": 0.0}}', "detection_threshold"),
    ('{"radar": {"mount_tilt": 2.0}}', "mount_tilt"),
    ('{"grid": {"dims": [0, 4, 4]}}', "dims"),
    ('{"terrain": {"slope_weight": -1}}', "slope_weight"),
    ('{"sim": {"noise_mean": 0.2}}', "noise"),
    ('{"radar": ', "line 1"),
])
def test_invalid_documents(tmp_path, doc, match):
    (tmp_path / "c.json").write_text(doc)
    with pytest.raises(ConfigError, match=match):
        load_config(tmp_path / "c.json")


def test_with_threshold_validates():
    assert PipelineConfig().with_threshold(0.31).radar.detection_threshold == 0.31
    with pytest.raises(ConfigError):
        PipelineConfig().with_threshold(1.0)


def test_shipped_config_matches_defaults():
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "configs" / "pipeline.json"
    assert load_config(path) == PipelineConfig()
