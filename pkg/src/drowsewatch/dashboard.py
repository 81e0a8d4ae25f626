"""Embedded HTTP dashboard: summary page plus a small JSON query/ingest API.

Routes:
    GET  /                      HTML page with both totals and two event tables
    GET  /api/summary           {"yawns": n, "alarms": n}
    GET  /api/events?kind=yawn|alarm&limit=&offset=   event array
    POST /api/events            append one event (403 when read-only)

Reads re-scan the store file, so a dashboard process tracks a pipeline
writing the same file with no coordination beyond line-atomic appends.
"""

from __future__ import annotations

import html
import json
import logging
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .store import Event, EventStore, StoreError

log = logging.getLogger(__name__)


@dataclass
class DashboardConfig:
    bind_address: str = "127.0.0.1:8330"
    store_path: str = "events.jsonl"
    read_only: bool = False

    def host_port(self) -> tuple[str, int]:
        host, _, port = self.bind_address.rpartition(":")
        if not host:
            raise ValueError(f"bind_address must be host:port, got {self.bind_address!r}")
        return host, int(port)


_PAGE = """<!DOCTYPE html>
<html lang="en">
<head><meta charset="utf-8"><title>Drowsiness report</title>
<style>
body {{ font-family: sans-serif; margin: 2em; }}
table {{ border-collapse: collapse; margin: 1em 0; }}
td, th {{ border: 1px solid #999; padding: 4px 10px; }}
caption {{ font-weight: bold; text-align: left; padding: 4px 0; }}
</style></head>
<body>
<h1>Drowsiness report</h1>
<p>Total yawns: <strong>{yawns}</strong> &middot; Total alarms: <strong>{alarms}</strong></p>
{yawn_table}
{alarm_table}
</body>
</html>
"""


def _event_table(title: str, events: list[Event]) -> str:
    rows = "\n".join(
        f"<tr><td>{html.escape(e.wall_time)}</td><td>{e.t_ms}</td>"
        f"<td>{html.escape(e.session_id)}</td></tr>"
        for e in events
    )
    return (
        f"<table><caption>{html.escape(title)}</caption>"
        "<tr><th>wall time</th><th>t_ms</th><th>session</th></tr>"
        f"{rows}</table>"
    )


def _event_to_json(e: Event) -> dict:
    return {"kind": e.kind, "t_ms": e.t_ms, "session": e.session_id, "wall": e.wall_time}


class _Handler(BaseHTTPRequestHandler):
    server_version = "drowsewatch"

    # set by serve()
    store: EventStore
    read_only: bool
    write_lock: threading.Lock

    def log_message(self, fmt, *args):  # route request logging through logging
        log.debug("dashboard: " + fmt, *args)

    def _send(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, obj) -> None:
        self._send(status, json.dumps(obj).encode("utf-8"), "application/json")

    def do_GET(self):  # noqa: N802 (http.server naming)
        url = urlparse(self.path)
        try:
            if url.path == "/":
                self._page()
            elif url.path == "/api/summary":
                s = self.store.summary()
                self._send_json(200, {"yawns": s.yawn_count, "alarms": s.alarm_count})
            elif url.path == "/api/events":
                self._events(parse_qs(url.query))
            else:
                self._send_json(404, {"error": f"unknown path {url.path}"})
        except StoreError as exc:
            self._send_json(500, {"error": str(exc)})

    def _page(self):
        summary = self.store.summary()
        body = _PAGE.format(
            yawns=summary.yawn_count,
            alarms=summary.alarm_count,
            yawn_table=_event_table("Yawns", self.store.list_events("yawn")),
            alarm_table=_event_table("Alarms", self.store.list_events("alarm")),
        )
        self._send(200, body.encode("utf-8"), "text/html; charset=utf-8")

    def _events(self, query: dict):
        kind = query.get("kind", [None])[0]
        if kind not in ("yawn", "alarm"):
            self._send_json(400, {"error": "kind must be yawn or alarm"})
            return
        try:
            limit = int(query["limit"][0]) if "limit" in query else None
            offset = int(query["offset"][0]) if "offset" in query else 0
            if offset < 0 or (limit is not None and limit < 0):
                raise ValueError
        except ValueError:
            self._send_json(400, {"error": "limit/offset must be non-negative integers"})
            return
        events = self.store.list_events(kind, limit=limit, offset=offset)
        self._send_json(200, [_event_to_json(e) for e in events])

    def do_POST(self):  # noqa: N802
        url = urlparse(self.path)
        if url.path != "/api/events":
            self._send_json(404, {"error": f"unknown path {url.path}"})
            return
        if self.read_only:
            self._send_json(403, {"error": "dashboard is read-only"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            obj = json.loads(self.rfile.read(length))
            event = Event(kind=obj["kind"], t_ms=obj["t_ms"], session_id=obj["session"],
                          wall_time=obj["wall"])
        except (ValueError, KeyError, TypeError) as exc:
            self._send_json(400, {"error": f"malformed event body: {exc}"})
            return
        try:
            with self.write_lock:
                self.store.append_event(event)
        except StoreError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self._send_json(200, {"ok": True})


@dataclass
class DashboardHandle:
    """A running dashboard; address carries the actual bound port."""

    server: ThreadingHTTPServer
    thread: threading.Thread
    store: EventStore
    address: tuple[str, int]

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)
        self.store.close()


def serve(cfg: DashboardConfig) -> DashboardHandle:
    """Start serving in a background thread; returns a stoppable handle."""
    store = EventStore(cfg.store_path, read_only=cfg.read_only)

    class BoundHandler(_Handler):
        pass

    BoundHandler.store = store
    BoundHandler.read_only = cfg.read_only
    BoundHandler.write_lock = threading.Lock()

    server = ThreadingHTTPServer(cfg.host_port(), BoundHandler)
    thread = threading.Thread(target=server.serve_forever, name="dashboard", daemon=True)
    thread.start()
    return DashboardHandle(server=server, thread=thread, store=store,
                           address=server.server_address[:2])
