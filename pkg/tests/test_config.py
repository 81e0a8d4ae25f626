"""Pipeline config round-trip and materialize-on-first-use tests."""

import json

import pytest

from drowsewatch.classifier import ClassifierConfig
from drowsewatch.config import ConfigError, PipelineConfig
from drowsewatch.fusion import FusionConfig
from drowsewatch.geometry import EyeSpec


class TestRoundTrip:
    def test_default_round_trip(self):
        cfg = PipelineConfig()
        assert PipelineConfig.from_dict(cfg.to_dict()) == cfg

    def test_custom_round_trip(self):
        cfg = PipelineConfig(
            fusion=FusionConfig(ear_close_threshold=0.25, alarm_frame_threshold=30,
                                policy="either"),
            classifier=ClassifierConfig(backend="constant", constant_value=0.75),
            left_eye=EyeSpec(1, 2, 3, 4, 5, 6),
            buffer_size=16,
            store_path="/tmp/events.jsonl",
            staleness_frames=5,
            alarm_command="beep {t_ms}",
        )
        assert PipelineConfig.from_dict(cfg.to_dict()) == cfg

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "cfg.json"
        cfg = PipelineConfig(fusion=FusionConfig(mar_yawn_threshold=0.8))
        cfg.save(path)
        assert PipelineConfig.load(path) == cfg

    def test_missing_file_materializes_defaults(self, tmp_path):
        path = tmp_path / "fresh.json"
        cfg = PipelineConfig.load(path)
        assert cfg == PipelineConfig()
        assert path.exists()
        obj = json.loads(path.read_text())
        # every default is spelled out in the written file
        assert obj["fusion"]["alarm_frame_threshold"] == 60
        assert obj["fusion"]["ear_close_threshold"] == 0.21
        assert obj["classifier"]["backend"] == "scripted"
        assert obj["left_eye"] == [30, 29, 28, 243, 22, 24]
        assert obj["right_eye"] == [463, 258, 259, 359, 254, 252]
        assert obj["mouth"] == [61, 39, 0, 269, 287, 405, 17, 181]
        assert obj["buffer_size"] == 64
        assert obj["staleness_frames"] == 2

    def test_partial_file_fills_defaults(self, tmp_path):
        path = tmp_path / "partial.json"
        path.write_text('{"fusion": {"alarm_frame_threshold": 10}}')
        cfg = PipelineConfig.load(path)
        assert cfg.fusion.alarm_frame_threshold == 10
        assert cfg.fusion.ear_close_threshold == 0.21
        assert cfg.buffer_size == 64


class TestValidation:
    def test_bad_json_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError, match="not valid JSON"):
            PipelineConfig.load(path)

    def test_non_object_rejected(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1,2]")
        with pytest.raises(ConfigError, match="JSON object"):
            PipelineConfig.load(path)

    def test_invalid_nested_values(self):
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict({"fusion": {"alarm_frame_threshold": 0}})
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict({"classifier": {"backend": "psychic"}})
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict({"left_eye": [1, 1, 2, 3, 4, 5]})
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict({"fusion": {"frame_budget": 9}})

    def test_top_level_invariants(self):
        with pytest.raises(ConfigError):
            PipelineConfig(buffer_size=0)
        with pytest.raises(ConfigError):
            PipelineConfig(staleness_frames=-1)
