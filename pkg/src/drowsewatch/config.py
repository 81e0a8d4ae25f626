"""Pipeline configuration: one JSON document holding every knob.

Loading a path that does not exist yet writes the fully materialized
defaults there first, so each run's parameterization is archivable and a
fresh config file is self-documenting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .classifier import ClassifierConfig
from .fusion import FusionConfig
from .geometry import LEFT_EYE, MOUTH, RIGHT_EYE, EyeSpec, MouthSpec


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    fusion: FusionConfig = field(default_factory=FusionConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    left_eye: EyeSpec = LEFT_EYE
    right_eye: EyeSpec = RIGHT_EYE
    mouth: MouthSpec = MOUTH
    buffer_size: int = 64
    store_path: str = "events.jsonl"
    staleness_frames: int = 2
    alarm_command: str | None = None

    def __post_init__(self) -> None:
        if self.buffer_size < 1:
            raise ConfigError("buffer_size must be >= 1")
        if self.staleness_frames < 0:
            raise ConfigError("staleness_frames must be >= 0")

    def to_dict(self) -> dict:
        return {
            "fusion": {
                "ear_close_threshold": self.fusion.ear_close_threshold,
                "mar_yawn_threshold": self.fusion.mar_yawn_threshold,
                "cnn_threshold": self.fusion.cnn_threshold,
                "alarm_frame_threshold": self.fusion.alarm_frame_threshold,
                "yawn_min_frames": self.fusion.yawn_min_frames,
                "policy": self.fusion.policy,
            },
            "classifier": {
                "backend": self.classifier.backend,
                "constant_value": self.classifier.constant_value,
                "model_path": self.classifier.model_path,
            },
            "left_eye": list(self.left_eye.indices),
            "right_eye": list(self.right_eye.indices),
            "mouth": list(self.mouth.indices),
            "buffer_size": self.buffer_size,
            "store_path": self.store_path,
            "staleness_frames": self.staleness_frames,
            "alarm_command": self.alarm_command,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PipelineConfig":
        try:
            fusion = FusionConfig(**obj.get("fusion", {}))
            classifier = ClassifierConfig(**obj.get("classifier", {}))
            kwargs = {}
            if "left_eye" in obj:
                kwargs["left_eye"] = EyeSpec(*obj["left_eye"])
            if "right_eye" in obj:
                kwargs["right_eye"] = EyeSpec(*obj["right_eye"])
            if "mouth" in obj:
                kwargs["mouth"] = MouthSpec(*obj["mouth"])
            for name in ("buffer_size", "store_path", "staleness_frames", "alarm_command"):
                if name in obj:
                    kwargs[name] = obj[name]
            return cls(fusion=fusion, classifier=classifier, **kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        """Read a config file; materialize defaults there if it is missing."""
        p = Path(path)
        if not p.exists():
            cfg = cls()
            cfg.save(p)
            return cfg
        try:
            obj = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError(f"config file {p} must hold a JSON object")
        return cls.from_dict(obj)
