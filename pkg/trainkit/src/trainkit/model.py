"""Classifier model: a convolutional backbone plus the custom top.

The top follows the training recipe exactly: max pooling, flatten, dropout,
a 1024-unit ReLU layer, and a single sigmoid output. The compact backbone
is the desk-scale stand-in for a large pretrained network; it keeps the
exported operator set small (Conv/Relu/MaxPool/Gemm) so the interchange
file stays portable. A torchvision EfficientNetV2 backbone can be swapped
in for full-scale experiments, but only the compact backbone is exportable.
"""

from __future__ import annotations

import hashlib

import torch
from torch import nn

IMAGE_SIZE = 224

BACKBONES = ("compact", "efficientnet_v2_s")


class CompactBackbone(nn.Sequential):
    """Three stride-2 convs: 3x224x224 -> 16x28x28."""

    def __init__(self):
        super().__init__(
            nn.Conv2d(3, 8, kernel_size=3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(8, 16, kernel_size=3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(16, 16, kernel_size=3, stride=2, padding=1),
            nn.ReLU(),
        )


class ClassifierHead(nn.Sequential):
    def __init__(self, in_channels: int, spatial: int, dropout: float):
        flat = in_channels * (spatial // 2) * (spatial // 2)
        super().__init__(
            nn.MaxPool2d(kernel_size=2, stride=2),
            nn.Flatten(),
            nn.Dropout(dropout),
            nn.Linear(flat, 1024),
            nn.ReLU(),
            nn.Linear(1024, 1),
            nn.Sigmoid(),
        )


class DrowsinessNet(nn.Module):
    """backbone -> head; forward returns probabilities in [0, 1], shape (N, 1)."""

    def __init__(self, backbone: str = "compact", dropout: float = 0.6,
                 pretrained: bool = False):
        super().__init__()
        if backbone not in BACKBONES:
            raise ValueError(f"unknown backbone {backbone!r}, expected one of {BACKBONES}")
        self.backbone_name = backbone
        self.dropout = dropout
        if backbone == "compact":
            self.backbone = CompactBackbone()
            self.head = ClassifierHead(in_channels=16, spatial=28, dropout=dropout)
        else:
            from torchvision.models import efficientnet_v2_s

            weights = "IMAGENET1K_V1" if pretrained else None
            net = efficientnet_v2_s(weights=weights)
            self.backbone = net.features  # 1280x7x7 for 224 input
            self.head = ClassifierHead(in_channels=1280, spatial=7, dropout=dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.backbone(x))

    def freeze_backbone(self) -> None:
        for p in self.backbone.parameters():
            p.requires_grad = False

    def unfreeze_all(self) -> None:
        for p in self.parameters():
            p.requires_grad = True

    def parameter_counts(self) -> dict[str, int]:
        total = sum(p.numel() for p in self.parameters())
        trainable = sum(p.numel() for p in self.parameters() if p.requires_grad)
        return {"total": total, "trainable": trainable,
                "non_trainable": total - trainable}


def backbone_checksum(model: DrowsinessNet) -> str:
    """Digest of every backbone tensor, for freeze-contract checks."""
    digest = hashlib.sha256()
    for name, tensor in sorted(model.backbone.state_dict().items()):
        digest.update(name.encode("utf-8"))
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def save_checkpoint(model: DrowsinessNet, path, extra: dict | None = None) -> None:
    payload = {
        "state_dict": model.state_dict(),
        "backbone": model.backbone_name,
        "dropout": model.dropout,
    }
    if extra:
        payload.update(extra)
    torch.save(payload, path)


def load_checkpoint(path) -> DrowsinessNet:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = DrowsinessNet(backbone=payload["backbone"], dropout=payload["dropout"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
