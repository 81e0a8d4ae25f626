"""Eye and mouth aspect ratios from facial landmark coordinates.

EAR uses six landmarks per eye: two vertical point pairs over one
horizontal pair,

    EAR = (||p2 - p6|| + ||p3 - p5||) / (2 * ||p1 - p4||)

MAR uses eight mouth landmarks with three vertical pairs,

    MAR = (||p2 - p8|| + ||p3 - p7|| + ||p4 - p6||) / (3 * ||p1 - p5||)

Distances are Euclidean over (x, y) only; the landmark z estimate is not
commensurate with x/y and is ignored. A ratio is either a finite value or
invalid with a reason; missing landmarks never raise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Denominators at or below this (in normalized image coordinates) make the
# ratio invalid instead of blowing up on detector glitches.
DEGENERATE_EPS = 1e-9

LANDMARK_COUNT = 468

# Invalidity reasons carried by Ratio.
REASON_MISSING = "missing-landmark"
REASON_DEGENERATE = "degenerate-horizontal"
REASON_NO_FACE = "no-face"


@dataclass(frozen=True)
class Point3:
    """One landmark position in normalized image coordinates."""

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self) -> None:
        for name, v in (("x", self.x), ("y", self.y), ("z", self.z)):
            if not math.isfinite(v):
                raise ValueError(f"non-finite landmark coordinate {name}={v!r}")


@dataclass
class LandmarkFrame:
    """One timestamped frame of facial landmarks.

    ``points`` is sparse: recordings may carry only the handful of indices
    the ratio formulas need instead of the full detector output.
    """

    t_ms: int
    face_found: bool
    points: dict[int, Point3] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.t_ms < 0:
            raise ValueError(f"t_ms must be non-negative, got {self.t_ms}")
        for idx in self.points:
            if not (0 <= idx < LANDMARK_COUNT):
                raise ValueError(f"landmark index {idx} out of range [0, {LANDMARK_COUNT - 1}]")


@dataclass(frozen=True)
class EyeSpec:
    """Six landmark indices (p1..p6) defining one eye for the EAR formula."""

    p1: int
    p2: int
    p3: int
    p4: int
    p5: int
    p6: int

    def __post_init__(self) -> None:
        if len(set(self.indices)) != 6:
            raise ValueError(f"eye spec indices must be distinct, got {self.indices}")

    @property
    def indices(self) -> tuple[int, ...]:
        return (self.p1, self.p2, self.p3, self.p4, self.p5, self.p6)


@dataclass(frozen=True)
class MouthSpec:
    """Eight landmark indices (p1..p8) defining the mouth for the MAR formula."""

    p1: int
    p2: int
    p3: int
    p4: int
    p5: int
    p6: int
    p7: int
    p8: int

    def __post_init__(self) -> None:
        if len(set(self.indices)) != 8:
            raise ValueError(f"mouth spec indices must be distinct, got {self.indices}")

    @property
    def indices(self) -> tuple[int, ...]:
        return (self.p1, self.p2, self.p3, self.p4, self.p5, self.p6, self.p7, self.p8)


# Default index assignments. These are configuration, not constants of the
# formulas; swap in other detector contours via EyeSpec/MouthSpec.
LEFT_EYE = EyeSpec(30, 29, 28, 243, 22, 24)
RIGHT_EYE = EyeSpec(463, 258, 259, 359, 254, 252)
MOUTH = MouthSpec(61, 39, 0, 269, 287, 405, 17, 181)


@dataclass(frozen=True)
class Ratio:
    """A computed aspect ratio: either a finite value >= 0 or invalid."""

    value: float | None = None
    reason: str | None = None

    @property
    def valid(self) -> bool:
        return self.value is not None

    @classmethod
    def of(cls, value: float) -> "Ratio":
        return cls(value=value)

    @classmethod
    def invalid(cls, reason: str) -> "Ratio":
        return cls(reason=reason)


@dataclass(frozen=True)
class AspectRatios:
    """Per-frame EAR (left/right/mean) and MAR with validity flags."""

    ear_left: Ratio
    ear_right: Ratio
    ear_mean: Ratio
    mar: Ratio


def no_face_ratios() -> AspectRatios:
    """All-invalid ratios for frames without a detected face."""
    r = Ratio.invalid(REASON_NO_FACE)
    return AspectRatios(ear_left=r, ear_right=r, ear_mean=r, mar=r)


def distance(p: Point3, q: Point3) -> float:
    """Euclidean distance over the (x, y) components; z is ignored."""
    return math.hypot(p.x - q.x, p.y - q.y)


def _gather(frame: LandmarkFrame, indices: tuple[int, ...]) -> list[Point3] | None:
    pts = []
    for idx in indices:
        p = frame.points.get(idx)
        if p is None:
            return None
        pts.append(p)
    return pts


def compute_ear(frame: LandmarkFrame, eye: EyeSpec) -> Ratio:
    """Eye aspect ratio for one eye, or invalid when it cannot be formed."""
    pts = _gather(frame, eye.indices)
    if pts is None:
        return Ratio.invalid(REASON_MISSING)
    p1, p2, p3, p4, p5, p6 = pts
    horizontal = distance(p1, p4)
    if horizontal <= DEGENERATE_EPS:
        return Ratio.invalid(REASON_DEGENERATE)
    return Ratio.of((distance(p2, p6) + distance(p3, p5)) / (2.0 * horizontal))


def compute_mar(frame: LandmarkFrame, mouth: MouthSpec) -> Ratio:
    """Mouth aspect ratio, or invalid when it cannot be formed."""
    pts = _gather(frame, mouth.indices)
    if pts is None:
        return Ratio.invalid(REASON_MISSING)
    p1, p2, p3, p4, p5, p6, p7, p8 = pts
    horizontal = distance(p1, p5)
    if horizontal <= DEGENERATE_EPS:
        return Ratio.invalid(REASON_DEGENERATE)
    vertical = distance(p2, p8) + distance(p3, p7) + distance(p4, p6)
    return Ratio.of(vertical / (3.0 * horizontal))


def compute_aspect_ratios(
    frame: LandmarkFrame,
    left: EyeSpec = LEFT_EYE,
    right: EyeSpec = RIGHT_EYE,
    mouth: MouthSpec = MOUTH,
) -> AspectRatios:
    """All four per-frame ratios; ear_mean is valid iff both eyes are."""
    if not frame.face_found:
        return no_face_ratios()
    ear_left = compute_ear(frame, left)
    ear_right = compute_ear(frame, right)
    if ear_left.valid and ear_right.valid:
        ear_mean = Ratio.of((ear_left.value + ear_right.value) / 2.0)
    else:
        ear_mean = Ratio.invalid(ear_left.reason if not ear_left.valid else ear_right.reason)
    return AspectRatios(
        ear_left=ear_left,
        ear_right=ear_right,
        ear_mean=ear_mean,
        mar=compute_mar(frame, mouth),
    )
