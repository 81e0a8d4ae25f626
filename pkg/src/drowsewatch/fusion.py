"""Per-frame decision fusion and the alarm/yawn state machine.

Two signals feed each frame: the landmark verdict (mean EAR below the
close threshold) and the classifier probability (at or above its
threshold). A policy combines them; when one signal is unavailable the
verdict falls back to whichever remains, so the classifier keeps working
when the face is covered and the landmarks keep working with no model.

Sleepy frames feed a consecutive-frame counter; the alarm fires when the
counter reaches the frame threshold and then restarts, so sustained sleep
keeps alarming. Yawns are debounced: MAR must stay above its threshold
for a minimum run, and a latch prevents duplicates within one open-mouth
episode.

step() is a pure state transition: replaying a stream from equal states
with equal config yields identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .geometry import AspectRatios

POLICIES = ("both", "either", "cnn_only", "landmark_only")


@dataclass
class FusionConfig:
    ear_close_threshold: float = 0.21
    mar_yawn_threshold: float = 0.6
    cnn_threshold: float = 0.5
    alarm_frame_threshold: int = 60
    yawn_min_frames: int = 15
    policy: str = "both"

    def __post_init__(self) -> None:
        for name in ("ear_close_threshold", "mar_yawn_threshold", "cnn_threshold"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.alarm_frame_threshold < 1:
            raise ValueError("alarm_frame_threshold must be >= 1")
        if self.yawn_min_frames < 1:
            raise ValueError("yawn_min_frames must be >= 1")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}, expected one of {POLICIES}")


@dataclass(frozen=True)
class FrameInputs:
    """The joined per-frame signals handed to the state machine."""

    ratios: AspectRatios
    probability: float | None
    t_ms: int


@dataclass(frozen=True)
class DrowsinessState:
    sleepy_counter: int = 0
    yawn_run: int = 0
    yawn_latched: bool = False
    total_alarms: int = 0
    total_yawns: int = 0

    def __post_init__(self) -> None:
        if self.sleepy_counter < 0 or self.yawn_run < 0:
            raise ValueError("counters must be non-negative")


@dataclass(frozen=True)
class StepOutput:
    sleepy_frame: bool
    yawn_event: bool
    alarm_event: bool


def judge_frame(inputs: FrameInputs, cfg: FusionConfig) -> bool:
    """Fused per-frame sleepiness verdict under the configured policy."""
    ear = inputs.ratios.ear_mean
    landmark_available = ear.valid
    landmark_sleepy = landmark_available and ear.value < cfg.ear_close_threshold
    cnn_available = inputs.probability is not None
    cnn_sleepy = cnn_available and inputs.probability >= cfg.cnn_threshold

    if not landmark_available and not cnn_available:
        return False
    if not landmark_available:
        return cnn_sleepy
    if not cnn_available:
        return landmark_sleepy

    if cfg.policy == "both":
        return landmark_sleepy and cnn_sleepy
    if cfg.policy == "either":
        return landmark_sleepy or cnn_sleepy
    if cfg.policy == "cnn_only":
        return cnn_sleepy
    return landmark_sleepy  # landmark_only


def step(
    state: DrowsinessState, inputs: FrameInputs, cfg: FusionConfig
) -> tuple[DrowsinessState, StepOutput]:
    """Advance the state machine by one frame; returns (new state, events)."""
    sleepy = judge_frame(inputs, cfg)

    alarm = False
    counter = state.sleepy_counter + 1 if sleepy else 0
    if counter == cfg.alarm_frame_threshold:
        alarm = True
        counter = 0

    yawn = False
    mar = inputs.ratios.mar
    if mar.valid and mar.value > cfg.mar_yawn_threshold:
        yawn_run = state.yawn_run + 1
        yawn_latched = state.yawn_latched
        if yawn_run >= cfg.yawn_min_frames and not yawn_latched:
            yawn = True
            yawn_latched = True
    else:
        yawn_run = 0
        yawn_latched = False

    new_state = DrowsinessState(
        sleepy_counter=counter,
        yawn_run=yawn_run,
        yawn_latched=yawn_latched,
        total_alarms=state.total_alarms + (1 if alarm else 0),
        total_yawns=state.total_yawns + (1 if yawn else 0),
    )
    return new_state, StepOutput(sleepy_frame=sleepy, yawn_event=yawn, alarm_event=alarm)


def reset(state: DrowsinessState, preserve_totals: bool = False) -> DrowsinessState:
    """Zero all counters and latches; totals survive only when asked to."""
    if preserve_totals:
        return replace(state, sleepy_counter=0, yawn_run=0, yawn_latched=False)
    return DrowsinessState()
