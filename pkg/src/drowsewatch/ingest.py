"""Frame record streams: file reader, synthetic generator, live process source.

The stream format is one JSON object per line in canonical field order:

    {"t_ms": <int>, "face": <bool>, "pts": {"<index>": [x, y, z], ...},
     "prob": <float|null>, "img": <string|null>, "label": <"sleepy"|"awake"|null>}

Absent optional fields serialize as null; when a record carries no landmark
data at all, "face" and "pts" are both null. Landmarks are stored sparsely,
so recordings may carry only the indices the ratio formulas use.
"""

from __future__ import annotations

import json
import logging
import math
import random
import shlex
import subprocess
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

from .geometry import LANDMARK_COUNT, LEFT_EYE, MOUTH, RIGHT_EYE, LandmarkFrame, Point3

log = logging.getLogger(__name__)

LABELS = ("sleepy", "awake")
MODES = ("alert", "eyes_closed", "yawning", "no_face")


class StreamFormatError(Exception):
    """A stream line failed validation; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None, line: str | None = None):
        self.line_no = line_no
        self.line = line
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)


@dataclass
class FrameRecord:
    """One stream unit: timestamp plus whichever signals this frame carries."""

    t_ms: int
    landmarks: LandmarkFrame | None = None
    probability: float | None = None
    image_ref: str | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        if self.t_ms < 0:
            raise ValueError("t_ms must be non-negative")
        if self.landmarks is None and self.probability is None and self.image_ref is None:
            raise ValueError("record must carry landmarks, a probability, or an image ref")
        if self.probability is not None and not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability {self.probability} outside [0, 1]")
        if self.label is not None and self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {self.label!r}")


def serialize_record(record: FrameRecord) -> str:
    """Canonical one-line encoding; deterministic for equal records."""
    obj: dict = {"t_ms": record.t_ms}
    if record.landmarks is None:
        obj["face"] = None
        obj["pts"] = None
    else:
        obj["face"] = record.landmarks.face_found
        obj["pts"] = {
            str(i): [p.x, p.y, p.z]
            for i, p in sorted(record.landmarks.points.items())
        }
    obj["prob"] = record.probability
    obj["img"] = record.image_ref
    obj["label"] = record.label
    return json.dumps(obj, separators=(",", ":"))


def parse_record(line: str, line_no: int | None = None, last_t_ms: int | None = None) -> FrameRecord:
    """Parse and validate one stream line."""

    def fail(msg: str):
        raise StreamFormatError(msg, line_no=line_no, line=line)

    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        fail(f"not valid JSON ({exc.msg})")
    if not isinstance(obj, dict):
        fail("line is not a JSON object")
    expected_keys = {"t_ms", "face", "pts", "prob", "img", "label"}
    if set(obj) != expected_keys:
        fail(f"unexpected field set {sorted(obj)}, expected {sorted(expected_keys)}")

    t_ms = obj["t_ms"]
    if not isinstance(t_ms, int) or isinstance(t_ms, bool) or t_ms < 0:
        fail(f"t_ms must be a non-negative integer, got {t_ms!r}")
    if last_t_ms is not None and t_ms < last_t_ms:
        fail(f"timestamp regression: {t_ms} after {last_t_ms}")

    face, pts = obj["face"], obj["pts"]
    landmarks = None
    if (face is None) != (pts is None):
        fail("face and pts must be both present or both null")
    if face is not None:
        if not isinstance(face, bool):
            fail(f"face must be a boolean, got {face!r}")
        if not isinstance(pts, dict):
            fail(f"pts must be an object, got {type(pts).__name__}")
        points = {}
        for key, coords in pts.items():
            try:
                idx = int(key)
            except ValueError:
                fail(f"landmark index {key!r} is not an integer")
            if not 0 <= idx < LANDMARK_COUNT:
                fail(f"landmark index {idx} out of range [0, {LANDMARK_COUNT - 1}]")
            if not isinstance(coords, list) or len(coords) != 3:
                fail(f"landmark {idx} must be a [x, y, z] triple")
            if not all(isinstance(c, (int, float)) and math.isfinite(c) for c in coords):
                fail(f"landmark {idx} has non-finite coordinates {coords!r}")
            points[idx] = Point3(float(coords[0]), float(coords[1]), float(coords[2]))
        landmarks = LandmarkFrame(t_ms=t_ms, face_found=face, points=points)

    prob = obj["prob"]
    if prob is not None:
        if isinstance(prob, bool) or not isinstance(prob, (int, float)):
            fail(f"prob must be a number or null, got {prob!r}")
        prob = float(prob)
        if not 0.0 <= prob <= 1.0:
            fail(f"prob {prob} outside [0, 1]")

    img = obj["img"]
    if img is not None and not isinstance(img, str):
        fail(f"img must be a string or null, got {img!r}")

    label = obj["label"]
    if label is not None and label not in LABELS:
        fail(f"label must be one of {LABELS} or null, got {label!r}")

    try:
        return FrameRecord(t_ms=t_ms, landmarks=landmarks, probability=prob,
                           image_ref=img, label=label)
    except ValueError as exc:
        fail(str(exc))


def _parse_lines(lines: Iterable[str], source: str) -> Iterator[FrameRecord]:
    last_t = None
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        record = parse_record(line, line_no=line_no, last_t_ms=last_t)
        last_t = record.t_ms
        yield record


def read_stream(path) -> Iterator[FrameRecord]:
    """Yield validated records from a stream file, in file order."""
    with open(path, "r", encoding="utf-8") as f:
        yield from _parse_lines(f, source=str(path))


def write_stream(records: Iterable[FrameRecord], path) -> int:
    """Write records as canonical lines; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(serialize_record(record) + "\n")
            count += 1
    return count


# --- synthetic scenario generator ------------------------------------------


@dataclass(frozen=True)
class Segment:
    duration_frames: int
    mode: str
    probability: float | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        if self.duration_frames < 1:
            raise ValueError("segment duration must be >= 1 frame")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.probability is not None and not 0.0 <= self.probability <= 1.0:
            raise ValueError("scripted probability outside [0, 1]")
        if self.label is not None and self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}")


@dataclass(frozen=True)
class ScenarioSpec:
    fps: int
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        if not 1 <= self.fps <= 1000:
            raise ValueError("fps must be in [1, 1000]")
        if not self.segments:
            raise ValueError("scenario needs at least one segment")

    @classmethod
    def from_dict(cls, obj: dict) -> "ScenarioSpec":
        segments = tuple(
            Segment(
                duration_frames=s["frames"],
                mode=s["mode"],
                probability=s.get("prob"),
                label=s.get("label"),
            )
            for s in obj["segments"]
        )
        return cls(fps=obj["fps"], segments=segments)

    def to_dict(self) -> dict:
        return {
            "fps": self.fps,
            "segments": [
                {"frames": s.duration_frames, "mode": s.mode, "prob": s.probability,
                 "label": s.label}
                for s in self.segments
            ],
        }


# Base layouts sized so the +-0.005 jitter cannot push a mode out of its
# target band: eye span 0.32 keeps closed eyes under EAR 0.05 and open eyes
# above 0.24; mouth span 0.30 keeps yawns above MAR 0.9.
_EYE_SPAN = 0.32
_EYE_OPEN_HALF = 0.048  # vertical half-separation for EAR 0.3
_MOUTH_SPAN = 0.30


def _eye_points(spec, x0: float, y0: float, half: float) -> dict[int, tuple[float, float]]:
    third = _EYE_SPAN / 3.0
    return {
        spec.p1: (x0, y0),
        spec.p4: (x0 + _EYE_SPAN, y0),
        spec.p2: (x0 + third, y0 - half),
        spec.p6: (x0 + third, y0 + half),
        spec.p3: (x0 + 2 * third, y0 - half),
        spec.p5: (x0 + 2 * third, y0 + half),
    }


def _mouth_points(spec, x0: float, y0: float, half: float) -> dict[int, tuple[float, float]]:
    quarter = _MOUTH_SPAN / 4.0
    return {
        spec.p1: (x0, y0),
        spec.p5: (x0 + _MOUTH_SPAN, y0),
        spec.p2: (x0 + quarter, y0 - half),
        spec.p8: (x0 + quarter, y0 + half),
        spec.p3: (x0 + 2 * quarter, y0 - half),
        spec.p7: (x0 + 2 * quarter, y0 + half),
        spec.p4: (x0 + 3 * quarter, y0 - half),
        spec.p6: (x0 + 3 * quarter, y0 + half),
    }


def _mode_layout(mode: str) -> dict[int, tuple[float, float]]:
    eye_half = 0.0 if mode == "eyes_closed" else _EYE_OPEN_HALF
    mouth_half = _MOUTH_SPAN / 2.0 if mode == "yawning" else 0.0
    layout = {}
    layout.update(_eye_points(LEFT_EYE, 0.05, 0.40, eye_half))
    layout.update(_eye_points(RIGHT_EYE, 0.55, 0.40, eye_half))
    layout.update(_mouth_points(MOUTH, 0.35, 0.70, mouth_half))
    return layout


def synth_sequence(spec: ScenarioSpec, seed: int) -> list[FrameRecord]:
    """Deterministic synthetic stream; same (spec, seed) gives identical output."""
    rng = random.Random(seed)
    records = []
    frame_idx = 0
    for segment in spec.segments:
        for _ in range(segment.duration_frames):
            t_ms = round(frame_idx * 1000 / spec.fps)
            if segment.mode == "no_face":
                landmarks = LandmarkFrame(t_ms=t_ms, face_found=False, points={})
                prob = segment.probability
            else:
                points = {}
                for idx, (x, y) in sorted(_mode_layout(segment.mode).items()):
                    jx = rng.uniform(-0.005, 0.005)
                    jy = rng.uniform(-0.005, 0.005)
                    points[idx] = Point3(x + jx, y + jy, 0.0)
                landmarks = LandmarkFrame(t_ms=t_ms, face_found=True, points=points)
                prob = segment.probability
            records.append(
                FrameRecord(
                    t_ms=t_ms,
                    landmarks=landmarks,
                    probability=prob,
                    label=segment.label,
                )
            )
            frame_idx += 1
    return records


# --- live detector process source -------------------------------------------


def _consume_live(stdout: IO[str], proc: subprocess.Popen) -> Iterator[FrameRecord]:
    last_t = None
    line_no = 0
    try:
        for raw in stdout:
            line_no += 1
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            try:
                record = parse_record(line, line_no=line_no, last_t_ms=last_t)
            except StreamFormatError as exc:
                log.warning("live source protocol violation, stopping stream: %s (content: %r)",
                            exc, line)
                return
            last_t = record.t_ms
            yield record
    finally:
        stdout.close()
        code = proc.wait()
        if code not in (0, None):
            log.warning("live detector process exited with status %s", code)
        if line_no == 0:
            log.warning("live detector process produced no frames")


def live_source(command: str | list[str]) -> Iterator[FrameRecord]:
    """Spawn an external detector process and stream records from its stdout.

    A malformed line is a protocol violation: the stream ends there and the
    offending content is logged.
    """
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    try:
        proc = subprocess.Popen(argv, stdout=subprocess.PIPE, text=True, bufsize=1)
    except OSError as exc:
        raise StreamFormatError(f"cannot spawn live detector {argv!r}: {exc}") from exc
    return _consume_live(proc.stdout, proc)
