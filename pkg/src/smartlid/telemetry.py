"""Operator-facing HTTP+JSON service.

Endpoints (all JSON field names are frozen; timestamps are ISO-8601 UTC):

    GET  /status           -> StatusSnapshot
    GET  /frames/thermal   -> latest normalized thermal frame (P5 bytes)
    GET  /frames/overlay   -> latest contour overlay (P6 bytes)
    GET  /log?since=&until= -> CSV slice; bare /log returns the whole file
                               with header, windowed requests return rows
                               with since <= timestamp < until and no header,
                               so adjacent windows concatenate byte-exactly
    POST /commands/aerate  -> 202, enqueues an on-demand aeration
    PUT  /schedule         -> {"time": "HH:MM"} sets the daily trigger
    GET  /events           -> server-sent StatusSnapshot stream at <= 1 Hz

Mutating requests are serialized into the controller's command FIFO; read
handlers only ever see immutable snapshots, never live controller state.
"""

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .controller import Command, CommandKind, Mode, format_timestamp, parse_hhmm
from .images import encode_pnm
from .loop import ClosedLoopRun

EVENT_STREAM_PERIOD_S = 1.0  # <= 1 Hz push rate


class LiveRuntime:
    """Ticks a closed-loop run on a wall-clock cadence behind a lock.

    Each wall `period_s` advances the simulation by one tick (tick_s of
    simulated time), so sim time runs tick_s/period_s times faster than
    the wall. Snapshots and command submission are serialized on the lock.
    """

    def __init__(self, run: ClosedLoopRun, period_s: float = 1.0):
        self.run = run
        self.period_s = period_s
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._started_wall: float | None = None

    def start(self) -> None:
        self._started_wall = time.monotonic()
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def _loop(self) -> None:
        while not self._stop.wait(self.period_s):
            with self._lock:
                self.run.step()

    @property
    def uptime_s(self) -> float:
        if self._started_wall is None:
            return 0.0
        return time.monotonic() - self._started_wall

    def submit(self, command: Command) -> None:
        with self._lock:
            self.run.controller.submit(command)

    def controller_mode(self) -> Mode:
        with self._lock:
            return self.run.controller.mode

    def status_snapshot(self) -> dict:
        with self._lock:
            state = self.run.controller.state()
            frame = self.run.latest_frame
            growth = self.run.latest_growth_proxy
            sim_now = self.run.now
        sensor = None
        if frame is not None:
            sensor = {
                "timestamp": format_timestamp(frame.timestamp),
                "temp_c": round(frame.temperature, 2),
                "humidity_pct": round(frame.humidity, 1),
                "moisture": round(frame.moisture, 3),
                "ph": round(frame.ph, 2),
                "co2_ppm": round(frame.co2, 1),
                "no2_ppm": round(frame.no2, 4),
            }
        return {
            "mode": state.mode.value,
            "aeration_phase": state.aeration_phase.value,
            "gantry": {
                "x": round(state.gantry_pose[0], 6),
                "y": round(state.gantry_pose[1], 6),
                "z": round(state.gantry_pose[2], 6),
            },
            "spindle_spinning": state.spindle_spinning,
            "schedule": state.schedule,
            "path_mode": state.path_mode,
            "fault_cause": state.fault_cause,
            "last_aeration": (
                format_timestamp(state.last_aeration)
                if state.last_aeration is not None
                else None
            ),
            "sim_time": format_timestamp(sim_now),
            "uptime_s": round(self.uptime_s, 3),
            "growth_proxy": growth,
            "sensor": sensor,
        }

    def frame_bytes(self, kind: str) -> bytes | None:
        with self._lock:
            image = (
                self.run.latest_thermal if kind == "thermal" else self.run.latest_overlay
            )
        return None if image is None else encode_pnm(image)

    def log_slice(self, since: str | None, until: str | None) -> bytes:
        path = None if self.run.log is None else self.run.log.path
        if path is None:
            return b""
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except FileNotFoundError:
            return b""
        if since is None and until is None:
            return raw
        # fixed-width ISO-8601 UTC timestamps order correctly as strings,
        # so slicing never re-formats a row: windows concatenate byte-exactly
        out = []
        for line in raw.split(b"\n"):
            if not line or line.startswith(b"timestamp,"):
                continue
            ts = line.split(b",", 1)[0].decode("ascii", "replace")
            if since is not None and ts < since:
                continue
            if until is not None and ts >= until:
                continue
            out.append(line)
        return b"".join(piece + b"\n" for piece in out)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "smartlid"
    runtime: LiveRuntime  # set by make_server

    def log_message(self, fmt, *args):  # quiet by default
        pass

    # -- helpers ---------------------------------------------------------------

    def _send(self, code: int, body: bytes, content_type: str) -> None:
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, code: int, payload: dict) -> None:
        self._send(code, json.dumps(payload).encode("utf-8"), "application/json")

    def _error(self, code: int, message: str) -> None:
        self._send_json(code, {"error": message})

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    # -- verbs -------------------------------------------------------------------

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/status":
            self._send_json(200, self.runtime.status_snapshot())
        elif url.path == "/frames/thermal":
            self._frame("thermal", "image/x-portable-graymap")
        elif url.path == "/frames/overlay":
            self._frame("overlay", "image/x-portable-pixmap")
        elif url.path == "/log":
            params = parse_qs(url.query)
            since = params.get("since", [None])[0]
            until = params.get("until", [None])[0]
            self._send(200, self.runtime.log_slice(since, until), "text/csv")
        elif url.path == "/events":
            self._event_stream()
        else:
            self._error(404, f"unknown path {url.path}")

    def _frame(self, kind: str, content_type: str) -> None:
        body = self.runtime.frame_bytes(kind)
        if body is None:
            self._error(404, "no frame captured yet")
        else:
            self._send(200, body, content_type)

    def _event_stream(self) -> None:
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Connection", "close")
        self.end_headers()
        try:
            while True:
                payload = json.dumps(self.runtime.status_snapshot())
                self.wfile.write(b"data: " + payload.encode("utf-8") + b"\n\n")
                self.wfile.flush()
                time.sleep(EVENT_STREAM_PERIOD_S)
        except (BrokenPipeError, ConnectionResetError):
            pass

    def do_POST(self):
        url = urlparse(self.path)
        if url.path == "/commands/aerate":
            if self.runtime.controller_mode() == Mode.FAULT:
                self._error(409, "controller is in FAULT; STOP and re-home first")
                return
            self.runtime.submit(Command(CommandKind.AERATE_NOW))
            self._send_json(202, {"accepted": True, "command": "AERATE_NOW"})
        else:
            self._error(404, f"unknown path {url.path}")

    def do_PUT(self):
        url = urlparse(self.path)
        if url.path != "/schedule":
            self._error(404, f"unknown path {url.path}")
            return
        try:
            payload = json.loads(self._read_body() or b"{}")
            value = payload["time"]
            parse_hhmm(value)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            self._error(400, f"malformed schedule payload: {exc}")
            return
        if self.runtime.controller_mode() == Mode.FAULT:
            self._error(409, "controller is in FAULT; STOP and re-home first")
            return
        self.runtime.submit(Command(CommandKind.SET_SCHEDULE, value))
        self._send_json(200, {"schedule": value})


class TelemetryServer:
    """Owns the HTTP server thread; use start()/stop() or as a context manager."""

    def __init__(self, runtime: LiveRuntime, host: str = "127.0.0.1", port: int = 8177):
        handler = type("BoundHandler", (_Handler,), {"runtime": runtime})
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.httpd.daemon_threads = True
        self.runtime = runtime
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[:2]

    def start(self) -> None:
        self.runtime.start()
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        self.runtime.stop()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def __enter__(self) -> "TelemetryServer":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def serve(
    run: ClosedLoopRun,
    host: str = "127.0.0.1",
    port: int = 8177,
    period_s: float = 1.0,
) -> TelemetryServer:
    """Start the ticker and HTTP server; returns the running service."""
    server = TelemetryServer(LiveRuntime(run, period_s=period_s), host, port)
    server.start()
    return server
