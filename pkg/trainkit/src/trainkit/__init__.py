"""Training utility for the drowsiness classifier."""

from .dataset import DatasetError, DatasetReport, make_toy_dataset, validate_dataset
from .evaluate import EvalReport, evaluate_model
from .export import ExportError, ExportReport, export_model
from .model import DrowsinessNet, backbone_checksum, load_checkpoint, save_checkpoint
from .train import AugmentationConfig, TrainConfig, TrainResult, train

__version__ = "0.1.0"
