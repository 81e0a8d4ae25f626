"""Export a trained checkpoint to the interchange model file.

Contract shared with the detection pipeline's model backend: input named
"input" with shape 1x224x224x3 (RGB in [0, 1]), output named "prob" with
shape 1x1. The exported graph transposes to channels-first internally, so
callers never deal with layout.

Export finishes with a parity gate: the pipeline's own executor must
reproduce the checkpoint's probabilities on a probe batch within 1e-4.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch import nn

from drowsewatch.classifier import Classifier, ClassifierConfig, PreprocessedFrame

from .dataset import IMAGE_SUFFIXES
from .model import IMAGE_SIZE, CompactBackbone, DrowsinessNet, load_checkpoint
from . import onnx_writer as ow

PARITY_TOLERANCE = 1e-4
DEFAULT_PROBES = 16


class ExportError(Exception):
    pass


@dataclass
class ExportReport:
    model_path: str
    probes: int
    max_abs_diff: float

    def to_dict(self) -> dict:
        return {"model": self.model_path, "probes": self.probes,
                "max_abs_diff": self.max_abs_diff}


def _conv_attrs(conv: nn.Conv2d) -> dict:
    return {
        "kernel_shape": list(conv.kernel_size),
        "strides": list(conv.stride),
        "pads": [conv.padding[0], conv.padding[1], conv.padding[0], conv.padding[1]],
    }


def build_model_bytes(model: DrowsinessNet) -> bytes:
    """Serialize the compact architecture as an ONNX graph."""
    if not isinstance(model.backbone, CompactBackbone):
        raise ExportError(
            f"only the compact backbone is exportable, got {model.backbone_name!r}"
        )
    model.eval()
    nodes = [ow.node_proto("Transpose", ["input"], ["nchw"], name="to_nchw",
                           perm=[0, 3, 1, 2])]
    initializers = []
    current = "nchw"
    idx = 0

    def fresh(tag: str) -> str:
        nonlocal idx
        idx += 1
        return f"{tag}_{idx}"

    for module in list(model.backbone) + list(model.head):
        if isinstance(module, nn.Conv2d):
            w, b = f"conv{idx}_w", f"conv{idx}_b"
            initializers.append(ow.tensor_proto(w, module.weight.detach().numpy()))
            initializers.append(ow.tensor_proto(b, module.bias.detach().numpy()))
            out = fresh("conv")
            nodes.append(ow.node_proto("Conv", [current, w, b], [out], name=out,
                                       **_conv_attrs(module)))
            current = out
        elif isinstance(module, nn.ReLU):
            out = fresh("relu")
            nodes.append(ow.node_proto("Relu", [current], [out], name=out))
            current = out
        elif isinstance(module, nn.MaxPool2d):
            out = fresh("pool")
            k = module.kernel_size if isinstance(module.kernel_size, tuple) \
                else (module.kernel_size, module.kernel_size)
            s = module.stride if isinstance(module.stride, tuple) \
                else (module.stride, module.stride)
            nodes.append(ow.node_proto("MaxPool", [current], [out], name=out,
                                       kernel_shape=list(k), strides=list(s)))
            current = out
        elif isinstance(module, nn.Flatten):
            out = fresh("flat")
            nodes.append(ow.node_proto("Flatten", [current], [out], name=out, axis=1))
            current = out
        elif isinstance(module, nn.Dropout):
            continue  # inference-time identity
        elif isinstance(module, nn.Linear):
            w, b = f"fc{idx}_w", f"fc{idx}_b"
            initializers.append(ow.tensor_proto(w, module.weight.detach().numpy()))
            initializers.append(ow.tensor_proto(b, module.bias.detach().numpy()))
            out = fresh("fc")
            nodes.append(ow.node_proto("Gemm", [current, w, b], [out], name=out,
                                       alpha=1.0, beta=1.0, transB=1))
            current = out
        elif isinstance(module, nn.Sigmoid):
            out = "prob"
            nodes.append(ow.node_proto("Sigmoid", [current], [out], name=out))
            current = out
        else:
            raise ExportError(f"module {type(module).__name__} has no export mapping")

    if current != "prob":
        raise ExportError("architecture did not terminate in the sigmoid output")
    return ow.model_proto(
        nodes=nodes,
        initializers=initializers,
        inputs=[ow.value_info_proto("input", [1, IMAGE_SIZE, IMAGE_SIZE, 3])],
        outputs=[ow.value_info_proto("prob", [1, 1])],
    )


def _probe_tensors(probe_dir, n_probes: int, seed: int = 123) -> list[np.ndarray]:
    """n_probes HxWx3 float32 arrays in [0, 1]; real images first, noise after."""
    tensors: list[np.ndarray] = []
    if probe_dir is not None:
        paths = sorted(p for p in Path(probe_dir).rglob("*")
                       if p.suffix.lower() in IMAGE_SUFFIXES)
        for path in paths[:n_probes]:
            with Image.open(path) as img:
                rgb = img.convert("RGB").resize((IMAGE_SIZE, IMAGE_SIZE),
                                                Image.Resampling.BILINEAR)
            tensors.append(np.asarray(rgb, dtype=np.float32) / 255.0)
    rng = np.random.default_rng(seed)
    while len(tensors) < n_probes:
        tensors.append(rng.random((IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.float32))
    return tensors


def export_model(
    checkpoint_path,
    out_path,
    probe_dir=None,
    n_probes: int = DEFAULT_PROBES,
    tolerance: float = PARITY_TOLERANCE,
) -> ExportReport:
    """Write the interchange file and verify parity against the checkpoint."""
    model = load_checkpoint(checkpoint_path)
    data = build_model_bytes(model)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(data)

    probes = _probe_tensors(probe_dir, n_probes)
    runner = Classifier(ClassifierConfig(backend="model", model_path=str(out_path)))
    max_diff = 0.0
    with torch.no_grad():
        for tensor in probes:
            torch_prob = float(model(
                torch.from_numpy(tensor).permute(2, 0, 1).unsqueeze(0)
            )[0, 0])
            onnx_prob = runner.classify(PreprocessedFrame(tensor=tensor))
            max_diff = max(max_diff, abs(torch_prob - onnx_prob))
    if max_diff > tolerance:
        raise ExportError(
            f"export parity violation: max |torch - onnx| = {max_diff:.2e} > {tolerance:.0e}"
        )
    return ExportReport(model_path=str(out_path), probes=len(probes),
                        max_abs_diff=max_diff)
