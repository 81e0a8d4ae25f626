"""The frame-processing engine: ingest -> geometry -> classifier -> fusion -> store.

Replay mode walks a recorded stream in lock-step (per-frame join, no
staleness) and synthesizes event wall times from a fixed epoch plus the
stream timestamp, so two runs over the same bytes produce byte-identical
event files.

Live mode decouples the stages: a producer thread feeds a bounded queue,
the classifier runs on its own executor, and the joiner substitutes the
most recent classifier result when the current frame's is not ready yet
(staleness capped at a configurable frame count, each substitution
logged). Alarm hooks run on a separate executor so a slow external command
never stalls frame processing.
"""

from __future__ import annotations

import hashlib
import logging
import queue
import shlex
import subprocess
import sys
import threading
from concurrent.futures import Future, ThreadPoolExecutor
from concurrent.futures import TimeoutError as FuturesTimeout
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .classifier import Classifier, ClassifierError, FramePixels, preprocess
from .config import PipelineConfig
from .fusion import DrowsinessState, FrameInputs, StepOutput, step
from .geometry import compute_aspect_ratios, no_face_ratios
from .ingest import FrameRecord
from .store import Event, EventStore, StoreError

log = logging.getLogger(__name__)

# Event wall times in replay mode count from this fixed instant.
REPLAY_EPOCH_MS = 0


def wall_time_from_epoch(t_ms: int, epoch_ms: int = REPLAY_EPOCH_MS) -> str:
    dt = datetime.fromtimestamp((epoch_ms + t_ms) / 1000.0, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def wall_time_now() -> str:
    dt = datetime.now(tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def replay_session_id(stream_bytes: bytes, config_bytes: bytes) -> str:
    digest = hashlib.sha256(stream_bytes + b"\x00" + config_bytes).hexdigest()
    return f"replay-{digest[:12]}"


def live_session_id() -> str:
    return "live-" + datetime.now(tz=timezone.utc).strftime("%Y%m%d-%H%M%S%f")


@dataclass
class RunReport:
    """Counts of emitted events; dropped_events tracks persist failures."""

    session_id: str
    frames: int = 0
    alarms: int = 0
    yawns: int = 0
    invalid_ratio_frames: int = 0
    stale_probability_frames: int = 0
    dropped_events: int = 0

    def to_dict(self) -> dict:
        return {
            "session": self.session_id,
            "frames": self.frames,
            "alarms": self.alarms,
            "yawns": self.yawns,
            "invalid_ratio_frames": self.invalid_ratio_frames,
            "stale_probability_frames": self.stale_probability_frames,
            "dropped_events": self.dropped_events,
        }


class AlarmHook:
    """Runs the alarm command (or a stderr notice) off the frame loop."""

    def __init__(self, command_template: str | None):
        self.command_template = command_template
        self._executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix="alarm-hook")

    def fire(self, kind: str, t_ms: int, session_id: str) -> None:
        self._executor.submit(self._run, kind, t_ms, session_id)

    def _run(self, kind: str, t_ms: int, session_id: str) -> None:
        if not self.command_template:
            print(f"ALARM: {kind} at t_ms={t_ms} session={session_id}", file=sys.stderr)
            return
        cmd = self.command_template.format(kind=kind, t_ms=t_ms, session=session_id)
        try:
            subprocess.run(shlex.split(cmd), check=False, timeout=30)
        except (OSError, subprocess.TimeoutExpired) as exc:
            log.warning("alarm hook %r failed: %s", cmd, exc)

    def close(self) -> None:
        self._executor.shutdown(wait=True)


def _frame_probability(
    record: FrameRecord,
    classifier: Classifier,
    stream_dir: Path | None,
) -> float | None:
    """The classifier signal for one record, or None when unavailable."""
    backend = classifier.cfg.backend
    if backend == "scripted":
        return record.probability if record.probability is not None else None
    if backend == "constant":
        return classifier.classify(record)
    # model backend wants pixels
    if record.image_ref is None:
        return None
    path = (stream_dir / record.image_ref) if stream_dir else Path(record.image_ref)
    from PIL import Image  # deferred: only the model backend needs image decoding

    with Image.open(path) as img:
        rgb = img.convert("RGB")
        pixels = FramePixels(width=rgb.width, height=rgb.height, data=rgb.tobytes())
    return classifier.classify(preprocess(pixels))


def frame_inputs(record: FrameRecord, prob: float | None, cfg: PipelineConfig) -> FrameInputs:
    if record.landmarks is None:
        ratios = no_face_ratios()
    else:
        ratios = compute_aspect_ratios(
            record.landmarks, cfg.left_eye, cfg.right_eye, cfg.mouth
        )
    return FrameInputs(ratios=ratios, probability=prob, t_ms=record.t_ms)


def run_replay(
    records: Iterable[FrameRecord],
    cfg: PipelineConfig,
    store: EventStore,
    session_id: str,
    stream_dir: Path | None = None,
    hook: AlarmHook | None = None,
) -> RunReport:
    """Lock-step replay; deterministic for equal records and config."""
    classifier = Classifier(cfg.classifier)
    state = DrowsinessState()
    report = RunReport(session_id=session_id)
    for record in records:
        prob = _frame_probability(record, classifier, stream_dir)
        inputs = frame_inputs(record, prob, cfg)
        if not inputs.ratios.ear_mean.valid or not inputs.ratios.mar.valid:
            report.invalid_ratio_frames += 1
        state, out = step(state, inputs, cfg.fusion)
        _record_events(out, record.t_ms, session_id, store, report, hook,
                       wall_time=wall_time_from_epoch(record.t_ms))
        report.frames += 1
    return report


def _persist(store: EventStore, event: Event, report: RunReport) -> None:
    # a write failure loses the event but never stops the frame loop
    try:
        store.append_event(event)
    except (StoreError, OSError) as exc:
        report.dropped_events += 1
        log.error("event lost (%s at t_ms=%d): %s", event.kind, event.t_ms, exc)


def _record_events(
    out: StepOutput,
    t_ms: int,
    session_id: str,
    store: EventStore,
    report: RunReport,
    hook: AlarmHook | None,
    wall_time: str,
) -> None:
    if out.yawn_event:
        _persist(store, Event(kind="yawn", t_ms=t_ms, session_id=session_id,
                              wall_time=wall_time), report)
        report.yawns += 1
    if out.alarm_event:
        _persist(store, Event(kind="alarm", t_ms=t_ms, session_id=session_id,
                              wall_time=wall_time), report)
        report.alarms += 1
        if hook:
            hook.fire("alarm", t_ms, session_id)


_SENTINEL = object()


def run_live(
    records: Iterator[FrameRecord],
    cfg: PipelineConfig,
    store: EventStore,
    session_id: str,
    hook: AlarmHook | None = None,
    classify_fn: Callable[[FrameRecord], float | None] | None = None,
    wall_clock: Callable[[], str] = wall_time_now,
    join_timeout: float = 0.1,
) -> RunReport:
    """Concurrent pipeline: bounded ingest queue, classifier executor, joiner.

    The joiner waits up to ``join_timeout`` seconds for the current frame's
    classification. When the classifier lags, the frame proceeds with the
    most recent completed probability as long as it is at most
    ``staleness_frames`` old; every substitution is counted and logged.
    """
    classifier = Classifier(cfg.classifier)
    if classify_fn is None:
        classify_fn = lambda r: _frame_probability(r, classifier, None)

    buf: queue.Queue = queue.Queue(maxsize=cfg.buffer_size)

    def produce():
        try:
            for record in records:
                buf.put(record)
        finally:
            buf.put(_SENTINEL)

    producer = threading.Thread(target=produce, name="ingest", daemon=True)
    producer.start()

    report = RunReport(session_id=session_id)
    state = DrowsinessState()
    cls_executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix="classifier")
    pending: tuple[int, Future] | None = None
    latest: tuple[int, float | None] | None = None  # (frame index, probability)

    def harvest(idx: int, fut: Future, timeout: float | None):
        nonlocal latest
        try:
            latest = (idx, fut.result(timeout=timeout))
            return True
        except FuturesTimeout:
            return False
        except ClassifierError as exc:
            log.warning("classifier failed on frame %d: %s", idx, exc)
            latest = (idx, None)
            return True

    try:
        frame_idx = 0
        while True:
            item = buf.get()
            if item is _SENTINEL:
                break
            record: FrameRecord = item

            # harvest a finished task from an earlier frame
            if pending is not None and pending[1].done():
                harvest(*pending, timeout=0)
                pending = None
            # the executor samples frames: submit whenever it is free
            if pending is None:
                pending = (frame_idx, cls_executor.submit(classify_fn, record))

            fresh = False
            if pending is not None and pending[0] == frame_idx:
                if harvest(*pending, timeout=join_timeout):
                    pending = None
                    fresh = True

            prob: float | None = None
            if fresh:
                prob = latest[1]
            elif latest is not None and frame_idx - latest[0] <= cfg.staleness_frames:
                prob = latest[1]
                if prob is not None:
                    report.stale_probability_frames += 1
                    log.info("frame %d: substituted classifier result from frame %d",
                             frame_idx, latest[0])

            inputs = frame_inputs(record, prob, cfg)
            if not inputs.ratios.ear_mean.valid or not inputs.ratios.mar.valid:
                report.invalid_ratio_frames += 1
            state, out = step(state, inputs, cfg.fusion)
            _record_events(out, record.t_ms, session_id, store, report, hook,
                           wall_time=wall_clock())
            report.frames += 1
            frame_idx += 1
    finally:
        cls_executor.shutdown(wait=True)
        producer.join(timeout=5)
    return report
