"""Classification metrics for labeled runs: confusion matrix, accuracy,
episode-level alarm rates.

The positive class is "sleepy" throughout. Episode metrics treat a maximal
run of sleepy-labeled frames at least one alarm-threshold long as one
episode: the true-alarm rate is the fraction of episodes containing an
alarm, and the false-positive rate is the share of fired alarms that land
on awake-labeled frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .fusion import FusionConfig
from .ingest import FrameRecord
from .store import Event

POSITIVE = "sleepy"
NEGATIVE = "awake"


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class RunEvaluation:
    true_alarm_rate: float
    false_positive_rate: float
    episodes: int
    alarms: int


def confusion(predictions: Sequence[str], truth: Sequence[str]) -> ConfusionMatrix:
    """2x2 tally over per-frame labels, sleepy positive."""
    if len(predictions) != len(truth):
        raise MetricsError(
            f"length mismatch: {len(predictions)} predictions vs {len(truth)} truth labels"
        )
    tp = fp = fn = tn = 0
    for pred, actual in zip(predictions, truth):
        if pred not in (POSITIVE, NEGATIVE) or actual not in (POSITIVE, NEGATIVE):
            raise MetricsError(f"labels must be {POSITIVE!r} or {NEGATIVE!r}, got ({pred!r}, {actual!r})")
        if actual == POSITIVE:
            if pred == POSITIVE:
                tp += 1
            else:
                fn += 1
        else:
            if pred == POSITIVE:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def accuracy(m: ConfusionMatrix) -> float:
    if m.total < 1:
        raise MetricsError("accuracy undefined on an empty matrix")
    return (m.tp + m.tn) / m.total


def _sleepy_episodes(records: list[FrameRecord], min_frames: int) -> list[tuple[int, int]]:
    """Maximal sleepy-labeled runs of length >= min_frames as (t_start, t_end)."""
    episodes = []
    i, n = 0, len(records)
    while i < n:
        if records[i].label != POSITIVE:
            i += 1
            continue
        j = i
        while j < n and records[j].label == POSITIVE:
            j += 1
        if j - i >= min_frames:
            episodes.append((records[i].t_ms, records[j - 1].t_ms))
        i = j
    return episodes


def evaluate_run(
    events: Iterable[Event],
    stream: Iterable[FrameRecord],
    cfg: FusionConfig,
) -> RunEvaluation:
    """Episode-level alarm rates for a labeled stream and its event log.

    Alarms are matched to frames by timestamp, so the event-log ordering
    never affects the result.
    """
    records = list(stream)
    if not any(r.label is not None for r in records):
        raise MetricsError("stream carries no ground-truth labels")
    alarm_times = sorted(e.t_ms for e in events if e.kind == "alarm")
    episodes = _sleepy_episodes(records, cfg.alarm_frame_threshold)

    hit = 0
    for t_start, t_end in episodes:
        if any(t_start <= t <= t_end for t in alarm_times):
            hit += 1
    true_alarm_rate = hit / len(episodes) if episodes else 0.0

    awake_times = {r.t_ms for r in records if r.label == NEGATIVE}
    false_alarms = sum(1 for t in alarm_times if t in awake_times)
    false_positive_rate = false_alarms / len(alarm_times) if alarm_times else 0.0

    return RunEvaluation(
        true_alarm_rate=true_alarm_rate,
        false_positive_rate=false_positive_rate,
        episodes=len(episodes),
        alarms=len(alarm_times),
    )
