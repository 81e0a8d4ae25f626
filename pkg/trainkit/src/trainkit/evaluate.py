"""Checkpoint evaluation: per-image predictions at 0.5, confusion matrix,
accuracy. Positive class is sleepy."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch
from PIL import Image
from torchvision import transforms

from .dataset import CLASSES, IMAGE_SUFFIXES, DatasetError
from .model import IMAGE_SIZE, load_checkpoint


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self) -> float:
        if self.total < 1:
            raise DatasetError("no images evaluated")
        return (self.tp + self.tn) / self.total

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
                "total": self.total, "accuracy": self.accuracy}


def predict_probability(model, image_path) -> float:
    tf = transforms.Compose([
        transforms.Resize((IMAGE_SIZE, IMAGE_SIZE)),
        transforms.ToTensor(),
    ])
    with Image.open(image_path) as img:
        tensor = tf(img.convert("RGB")).unsqueeze(0)
    with torch.no_grad():
        return float(model(tensor)[0, 0])


def evaluate_model(checkpoint_path, validation_dir) -> EvalReport:
    """Run the checkpoint over validation/{sleepy,awake} at threshold 0.5."""
    root = Path(validation_dir)
    missing = [cls for cls in CLASSES if not (root / cls).is_dir()]
    if missing:
        raise DatasetError(f"validation dir lacks class directories: {missing}")
    model = load_checkpoint(checkpoint_path)
    tp = fp = fn = tn = 0
    for cls in CLASSES:
        for path in sorted((root / cls).iterdir()):
            if path.suffix.lower() not in IMAGE_SUFFIXES:
                continue
            predicted_sleepy = predict_probability(model, path) >= 0.5
            if cls == "sleepy":
                tp, fn = (tp + 1, fn) if predicted_sleepy else (tp, fn + 1)
            else:
                fp, tn = (fp + 1, tn) if predicted_sleepy else (fp, tn + 1)
    report = EvalReport(tp=tp, fp=fp, fn=fn, tn=tn)
    if report.total == 0:
        raise DatasetError(f"no decodable images under {root}")
    return report
