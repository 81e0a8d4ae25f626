"""Dataset layout validation and toy-dataset synthesis.

Expected layout:

    root/
      train/sleepy/        train/awake/
      validation/sleepy/   validation/awake/

Counts report decodable images only; undecodable files are listed by path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

SPLITS = ("train", "validation")
CLASSES = ("sleepy", "awake")
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


class DatasetError(Exception):
    pass


@dataclass
class DatasetReport:
    counts: dict[str, int] = field(default_factory=dict)  # "train/sleepy" -> n
    undecodable: list[str] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        return {"counts": dict(self.counts), "total": self.total,
                "undecodable": list(self.undecodable)}

    def matches_manifest(self, manifest: dict) -> bool:
        """Manifest holds expected counts keyed like the report, plus 'total'."""
        for key, expected in manifest.items():
            actual = self.total if key == "total" else self.counts.get(key)
            if actual != expected:
                return False
        return True


def class_dirs(root) -> dict[str, Path]:
    root = Path(root)
    return {f"{split}/{cls}": root / split / cls for split in SPLITS for cls in CLASSES}


def validate_dataset(root) -> DatasetReport:
    """Count decodable images per class directory; missing directories raise."""
    dirs = class_dirs(root)
    missing = [key for key, path in dirs.items() if not path.is_dir()]
    if missing:
        raise DatasetError(f"missing dataset directories: {', '.join(sorted(missing))}")
    report = DatasetReport()
    for key, path in dirs.items():
        count = 0
        for entry in sorted(path.iterdir()):
            if not entry.is_file() or entry.suffix.lower() not in IMAGE_SUFFIXES:
                continue
            try:
                with Image.open(entry) as img:
                    img.verify()
                count += 1
            except (UnidentifiedImageError, OSError):
                report.undecodable.append(str(entry))
        report.counts[key] = count
    return report


def load_manifest(path) -> dict:
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(manifest, dict):
        raise DatasetError("manifest must be a JSON object of expected counts")
    return manifest


def make_toy_dataset(root, per_dir: int = 2, size: int = 64, seed: int = 0) -> DatasetReport:
    """Synthesize a tiny separable dataset: sleepy images dark, awake bright."""
    rng = np.random.default_rng(seed)
    means = {"sleepy": 60, "awake": 200}
    for key, path in class_dirs(root).items():
        path.mkdir(parents=True, exist_ok=True)
        cls = key.split("/")[1]
        for i in range(per_dir):
            noise = rng.normal(means[cls], 30, size=(size, size, 3))
            pixels = np.clip(noise, 0, 255).astype(np.uint8)
            Image.fromarray(pixels, mode="RGB").save(path / f"{cls}_{i:03d}.png")
    return validate_dataset(root)
