"""Per-frame sleepiness probability behind a pluggable backend.

Backends:
  scripted  — echo the probability embedded in the frame record (test and
              replay double; lets the whole pipeline run with no model)
  constant  — fixed probability for every frame
  model     — inference on an exported ONNX classifier (input "input",
              1x224x224x3 in [0,1]; output "prob", 1x1)

Also home to the preprocessing pipeline (bilinear resize to 224x224 plus
1/255 rescale) and the swish/sigmoid activation utilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .onnxlite import OnnxError, OnnxModel

INPUT_SIZE = 224
MODEL_INPUT_NAME = "input"
MODEL_OUTPUT_NAME = "prob"

BACKENDS = ("scripted", "constant", "model")


class ClassifierError(Exception):
    """Backend cannot produce a probability for this input."""


def sigmoid(x: float) -> float:
    """Logistic function 1 / (1 + e^-x), overflow-safe on both tails."""
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


def swish(x: float) -> float:
    """Self-gated activation x * sigmoid(x)."""
    return x * sigmoid(x)


@dataclass(frozen=True)
class FramePixels:
    """Raw RGB image, row-major, 3 bytes per pixel."""

    width: int
    height: int
    data: bytes

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be >= 1, got {self.width}x{self.height}")
        expected = self.width * self.height * 3
        if len(self.data) != expected:
            raise ValueError(f"pixel buffer is {len(self.data)} bytes, expected {expected}")


@dataclass(frozen=True)
class PreprocessedFrame:
    """224x224x3 float32 tensor with every value in [0, 1]."""

    tensor: np.ndarray

    def __post_init__(self) -> None:
        if self.tensor.shape != (INPUT_SIZE, INPUT_SIZE, 3):
            raise ValueError(f"tensor shape {self.tensor.shape} != (224, 224, 3)")


def _bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-center bilinear resize with edge clamping (float64 math)."""
    in_h, in_w = img.shape[:2]
    src = img.astype(np.float64)
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    y0 = y0.astype(np.int64)
    x0 = x0.astype(np.int64)
    y0c = np.clip(y0, 0, in_h - 1)
    y1c = np.clip(y0 + 1, 0, in_h - 1)
    x0c = np.clip(x0, 0, in_w - 1)
    x1c = np.clip(x0 + 1, 0, in_w - 1)
    r0 = src[y0c]
    r1 = src[y1c]
    top = r0[:, x0c] * (1 - wx) + r0[:, x1c] * wx
    bot = r1[:, x0c] * (1 - wx) + r1[:, x1c] * wx
    return top * (1 - wy) + bot * wy


def preprocess(frame: FramePixels) -> PreprocessedFrame:
    """Resize to 224x224 (bilinear) and rescale pixel values by 1/255."""
    img = np.frombuffer(frame.data, dtype=np.uint8).reshape(frame.height, frame.width, 3)
    resized = _bilinear_resize(img, INPUT_SIZE, INPUT_SIZE)
    return PreprocessedFrame(tensor=(resized / 255.0).astype(np.float32))


@dataclass
class ClassifierConfig:
    backend: str = "scripted"
    constant_value: float = 0.0
    model_path: str | None = None

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown classifier backend {self.backend!r}, expected one of {BACKENDS}")
        if not 0.0 <= self.constant_value <= 1.0:
            raise ValueError(f"constant_value must be in [0, 1], got {self.constant_value}")
        if self.backend == "model" and not self.model_path:
            raise ValueError("model backend requires model_path")


class Classifier:
    """One configured backend; model files are loaded once at construction."""

    def __init__(self, cfg: ClassifierConfig):
        self.cfg = cfg
        self._model: OnnxModel | None = None
        if cfg.backend == "model":
            try:
                self._model = OnnxModel.load(cfg.model_path)
            except OSError as exc:
                raise ClassifierError(f"model backend: cannot read {cfg.model_path!r}: {exc}") from exc
            except OnnxError as exc:
                raise ClassifierError(f"model backend: invalid model file {cfg.model_path!r}: {exc}") from exc
            if MODEL_INPUT_NAME not in self._model.input_names:
                raise ClassifierError(
                    f"model backend: model lacks input {MODEL_INPUT_NAME!r} "
                    f"(has {self._model.input_names})"
                )
            if MODEL_OUTPUT_NAME not in self._model.output_names:
                raise ClassifierError(
                    f"model backend: model lacks output {MODEL_OUTPUT_NAME!r} "
                    f"(has {self._model.output_names})"
                )

    def classify(self, inp) -> float:
        """Probability in [0, 1] that this frame shows a sleepy driver.

        scripted expects a frame record carrying a probability; constant
        ignores the input; model expects a PreprocessedFrame.
        """
        backend = self.cfg.backend
        if backend == "constant":
            return self.cfg.constant_value
        if backend == "scripted":
            prob = getattr(inp, "probability", None)
            if prob is None:
                raise ClassifierError("scripted backend: frame record carries no probability")
            prob = float(prob)
            if not 0.0 <= prob <= 1.0:
                raise ClassifierError(f"scripted backend: probability {prob} outside [0, 1]")
            return prob
        # model
        if not isinstance(inp, PreprocessedFrame):
            raise ClassifierError(f"model backend: expected PreprocessedFrame, got {type(inp).__name__}")
        try:
            out = self._model.run({MODEL_INPUT_NAME: inp.tensor[np.newaxis, ...]})
        except OnnxError as exc:
            raise ClassifierError(f"model backend: inference failed: {exc}") from exc
        value = float(np.asarray(out[MODEL_OUTPUT_NAME]).reshape(-1)[0])
        if not 0.0 <= value <= 1.0:
            raise ClassifierError(f"model backend: output {value} outside [0, 1]")
        return value


def classify(inp, cfg: ClassifierConfig) -> float:
    """One-shot classification; prefer a Classifier instance in loops."""
    return Classifier(cfg).classify(inp)
