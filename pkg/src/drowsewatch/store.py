"""Append-only event store for yawn and alarm events.

One JSON object per line:

    {"kind": "yawn"|"alarm", "t_ms": <int>, "session": <string>, "wall": <ISO-8601 UTC>}

A single writer appends whole flushed lines; any number of readers re-scan
the file, so a dashboard in another process always sees a consistent
prefix. A torn final line (truncated write from a crash) is skipped with a
warning on read; everything before it stays readable.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)

EVENT_KINDS = ("yawn", "alarm")


class StoreError(Exception):
    pass


@dataclass(frozen=True)
class Event:
    kind: str
    t_ms: int
    session_id: str
    wall_time: str

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"kind must be one of {EVENT_KINDS}, got {self.kind!r}")
        if self.t_ms < 0:
            raise ValueError("t_ms must be non-negative")


@dataclass(frozen=True)
class Summary:
    yawn_count: int
    alarm_count: int


def serialize_event(event: Event) -> str:
    return json.dumps(
        {"kind": event.kind, "t_ms": event.t_ms, "session": event.session_id,
         "wall": event.wall_time},
        separators=(",", ":"),
    )


def parse_event(line: str) -> Event:
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("event line is not a JSON object")
    return Event(kind=obj["kind"], t_ms=obj["t_ms"], session_id=obj["session"],
                 wall_time=obj["wall"])


class EventStore:
    """File-backed store; open once for writing, query from anywhere."""

    def __init__(self, path, read_only: bool = False):
        self.path = Path(path)
        self.read_only = read_only
        self._file = None
        self._last_t_by_session: dict[str, int] = {}
        if not read_only:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._recover_tail()
            for event in self._scan():
                self._last_t_by_session[event.session_id] = event.t_ms
            self._file = open(self.path, "a", encoding="utf-8")

    def _recover_tail(self) -> None:
        """Truncate a torn final line so new appends start on a clean boundary.

        A torn line was never acknowledged, so dropping it is safe; leaving it
        would splice the next append onto its tail.
        """
        if not self.path.exists():
            return
        raw = self.path.read_bytes()
        if not raw:
            return
        body = raw[:-1] if raw.endswith(b"\n") else raw
        cut = body.rfind(b"\n") + 1
        last_line = body[cut:]
        torn = not raw.endswith(b"\n")
        if not torn and last_line.strip():
            try:
                parse_event(last_line.decode("utf-8"))
            except (ValueError, KeyError, UnicodeDecodeError):
                torn = True
        if torn:
            log.warning("recovering store %s: dropping torn final line %r",
                        self.path, last_line[:80])
            with open(self.path, "r+b") as f:
                f.truncate(cut)

    def close(self) -> None:
        if self._file:
            self._file.close()
            self._file = None

    def __enter__(self) -> "EventStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # --- write path ---------------------------------------------------------

    def append_event(self, event: Event) -> None:
        """Durably append one event; visible to readers once this returns."""
        if self.read_only or self._file is None:
            raise StoreError("store is read-only")
        last = self._last_t_by_session.get(event.session_id)
        if last is not None and event.t_ms < last:
            raise StoreError(
                f"event t_ms {event.t_ms} precedes session {event.session_id!r} last {last}"
            )
        self._file.write(serialize_event(event) + "\n")
        self._file.flush()
        os.fsync(self._file.fileno())
        self._last_t_by_session[event.session_id] = event.t_ms

    # --- read path ------------------------------------------------------------

    def _scan(self) -> list[Event]:
        if not self.path.exists():
            return []
        with open(self.path, "r", encoding="utf-8") as f:
            raw = f.read()
        events = []
        lines = raw.split("\n")
        # a well-formed file ends with a newline, leaving one trailing empty chunk
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                events.append(parse_event(line))
            except (ValueError, KeyError) as exc:
                if i >= len(lines) - 2:
                    log.warning("skipping torn final event line %r: %s", line[:80], exc)
                    continue
                raise StoreError(f"corrupt event line {i + 1}: {exc}") from exc
        return events

    def events(self, kind: str | None = None, session_id: str | None = None) -> list[Event]:
        found = self._scan()
        if kind is not None:
            found = [e for e in found if e.kind == kind]
        if session_id is not None:
            found = [e for e in found if e.session_id == session_id]
        return found

    def summary(self, session_id: str | None = None) -> Summary:
        """Exact per-kind counts, over everything or one session."""
        counts = {"yawn": 0, "alarm": 0}
        for event in self.events(session_id=session_id):
            counts[event.kind] += 1
        return Summary(yawn_count=counts["yawn"], alarm_count=counts["alarm"])

    def list_events(self, kind: str, limit: int | None = None, offset: int = 0,
                    session_id: str | None = None) -> list[Event]:
        """Events of one kind in append order with stable pagination."""
        if kind not in EVENT_KINDS:
            raise StoreError(f"unknown event kind {kind!r}")
        if offset < 0 or (limit is not None and limit < 0):
            raise StoreError("limit and offset must be non-negative")
        found = self.events(kind=kind, session_id=session_id)
        end = None if limit is None else offset + limit
        return found[offset:end]
