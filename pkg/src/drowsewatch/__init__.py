"""Deterministic, replayable driver-drowsiness detection pipeline."""

from .classifier import (
    Classifier,
    ClassifierConfig,
    ClassifierError,
    FramePixels,
    PreprocessedFrame,
    classify,
    preprocess,
    sigmoid,
    swish,
)
from .config import ConfigError, PipelineConfig
from .fusion import (
    DrowsinessState,
    FrameInputs,
    FusionConfig,
    StepOutput,
    judge_frame,
    reset,
    step,
)
from .geometry import (
    LEFT_EYE,
    MOUTH,
    RIGHT_EYE,
    AspectRatios,
    EyeSpec,
    LandmarkFrame,
    MouthSpec,
    Point3,
    Ratio,
    compute_aspect_ratios,
    compute_ear,
    compute_mar,
    distance,
)
from .ingest import (
    FrameRecord,
    ScenarioSpec,
    Segment,
    StreamFormatError,
    live_source,
    parse_record,
    read_stream,
    serialize_record,
    synth_sequence,
    write_stream,
)
from .metrics import (
    ConfusionMatrix,
    MetricsError,
    RunEvaluation,
    accuracy,
    confusion,
    evaluate_run,
)
from .store import Event, EventStore, StoreError, Summary

__version__ = "0.1.0"
