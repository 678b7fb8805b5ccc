"""Soft real-time rearing controller: daily aeration, sensing, logging.

The controller is driven by an injected monotone clock (simulated or wall)
through tick(); it owns the state machine, consumes commands FIFO, and
drives a gantry port. Day boundaries for the daily trigger are taken in
the clock's own epoch (UTC days).
"""

import os
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum

from .kinematics import CartesianDelta, MotorSpec, cartesian_to_steps
from .planner import ToolPath
from .types import SensorFrame

_HHMM_RE = re.compile(r"^([01]\d|2[0-3]):([0-5]\d)$")

DEFAULT_ENDSTOP_TIMEOUT_S = 120.0


class Mode(str, Enum):
    IDLE = "IDLE"
    AERATING = "AERATING"
    SENSING = "SENSING"
    FAULT = "FAULT"


class Phase(str, Enum):
    NONE = "NONE"
    HOMING = "HOMING"
    PLUNGING = "PLUNGING"
    MIXING = "MIXING"
    RETRACTING = "RETRACTING"
    RETURNING = "RETURNING"


class CommandKind(str, Enum):
    AERATE_NOW = "AERATE_NOW"
    SET_SCHEDULE = "SET_SCHEDULE"
    SET_PATH_MODE = "SET_PATH_MODE"
    STOP = "STOP"


PATH_MODES = ("raster", "spiral", "targeted")


def parse_hhmm(value: str) -> tuple[int, int]:
    match = _HHMM_RE.match(value)
    if not match:
        raise ValueError(f"expected HH:MM (00:00..23:59), got {value!r}")
    return int(match.group(1)), int(match.group(2))


@dataclass(frozen=True)
class Command:
    kind: CommandKind
    payload: str | None = None

    def __post_init__(self):
        if self.kind == CommandKind.SET_SCHEDULE:
            parse_hhmm(self.payload or "")
        elif self.kind == CommandKind.SET_PATH_MODE:
            if self.payload not in PATH_MODES:
                raise ValueError(f"unknown path mode {self.payload!r}")


def schedule_due(schedule: str, last_aeration: float | None, now: float) -> bool:
    """True iff today's trigger instant has passed and was not yet served.

    A missed instant (clock jump over it) is caught up once on the next
    tick of the same day; at most one True per calendar day as long as the
    caller stamps last_aeration with the firing time.
    """
    hh, mm = parse_hhmm(schedule)
    trigger = (now // 86400.0) * 86400.0 + hh * 3600.0 + mm * 60.0
    if now < trigger:
        return False
    return last_aeration is None or last_aeration < trigger


class SensorLog:
    """Append-only CSV sensor log with strict timestamp ordering.

    One row per accepted frame; a header is written when the file is new.
    Numeric precision is fixed so rows re-parse to identical values.
    """

    HEADER = "timestamp,temp_c,humidity_pct,moisture,ph,co2_ppm,no2_ppm,mode"

    def __init__(self, path: str | os.PathLike):
        self.path = os.fspath(path)
        self._last_ts: float | None = None
        if os.path.exists(self.path) and os.path.getsize(self.path) > 0:
            with open(self.path, "r", encoding="utf-8") as fh:
                lines = fh.read().splitlines()
            if lines and lines[0] != self.HEADER:
                raise ValueError(f"{self.path} is not a sensor log (bad header)")
            if len(lines) > 1:
                self._last_ts = parse_timestamp(lines[-1].split(",", 1)[0])

    def append(self, frame: SensorFrame, mode: str = Mode.IDLE.value) -> None:
        if self._last_ts is not None and frame.timestamp < self._last_ts:
            raise ValueError(
                f"out-of-order frame: {frame.timestamp} < {self._last_ts}"
            )
        line = format_row(frame, mode)
        new_file = not os.path.exists(self.path) or os.path.getsize(self.path) == 0
        with open(self.path, "a", encoding="utf-8") as fh:
            if new_file:
                fh.write(self.HEADER + "\n")
            fh.write(line + "\n")  # single write: one atomic appended record
        self._last_ts = frame.timestamp


def format_timestamp(ts: float) -> str:
    """ISO-8601 UTC at one-second precision (sub-second truncated)."""
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


def parse_timestamp(text: str) -> float:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(
        tzinfo=timezone.utc
    ).timestamp()


def format_row(frame: SensorFrame, mode: str) -> str:
    return ",".join(
        [
            format_timestamp(frame.timestamp),
            f"{frame.temperature:.2f}",
            f"{frame.humidity:.1f}",
            f"{frame.moisture:.3f}",
            f"{frame.ph:.2f}",
            f"{frame.co2:.1f}",
            f"{frame.no2:.4f}",
            mode,
        ]
    )


def parse_row(line: str) -> tuple[SensorFrame, str]:
    parts = line.split(",")
    if len(parts) != 8:
        raise ValueError(f"bad log row: {line!r}")
    frame = SensorFrame(
        timestamp=parse_timestamp(parts[0]),
        temperature=float(parts[1]),
        humidity=float(parts[2]),
        moisture=float(parts[3]),
        ph=float(parts[4]),
        co2=float(parts[5]),
        no2=float(parts[6]),
    )
    return frame, parts[7]


def log_frame(frame: SensorFrame, sink: SensorLog, mode: str = Mode.IDLE.value) -> None:
    """Append one frame to the log; rejects timestamps older than the last."""
    sink.append(frame, mode)


@dataclass(frozen=True)
class ControllerState:
    """Immutable snapshot of the controller, safe to hand to other threads."""

    mode: Mode
    aeration_phase: Phase
    schedule: str
    last_aeration: float | None
    gantry_pose: tuple[float, float, float]
    spindle_spinning: bool
    path_mode: str
    fault_cause: str | None


class Controller:
    """Owns the rearing state machine; advance it with tick() only.

    The gantry port must provide move_to/plunge/retract/spin_on/spin_off/
    return_home plus pose, at_home, end_stop_x and end_stop_y (the
    VirtualGantry of the simulator, or a hardware proxy).
    """

    def __init__(
        self,
        gantry,
        motor: MotorSpec,
        path_supplier,
        schedule: str = "11:00",
        sample_interval_s: float = 300.0,
        endstop_timeout_s: float = DEFAULT_ENDSTOP_TIMEOUT_S,
    ):
        parse_hhmm(schedule)
        self.gantry = gantry
        self.motor = motor
        self.path_supplier = path_supplier  # path_mode str -> ToolPath
        self.schedule = schedule
        self.sample_interval_s = sample_interval_s
        self.endstop_timeout_s = endstop_timeout_s
        self.mode = Mode.IDLE
        self.phase = Phase.NONE
        self.path_mode = "raster"
        self.last_aeration: float | None = None
        self._last_scheduled: float | None = None
        self._last_sample: float | None = None
        self._last_now: float | None = None
        self._commands: list[Command] = []
        self._path: ToolPath | None = None
        self._segment_index = 0
        self._carried = CartesianDelta(0.0, 0.0)
        self._returning_since: float | None = None
        self.fault_cause: str | None = None
        self.total_steps = 0
        self.trace: list[tuple] = []

    # -- public surface -------------------------------------------------------

    def submit(self, command: Command) -> None:
        self._commands.append(command)

    @property
    def current_path(self) -> ToolPath | None:
        return self._path

    @property
    def segments_streamed(self) -> int:
        """Waypoints reached so far in this aeration, including the start."""
        return self._segment_index

    def state(self) -> ControllerState:
        return ControllerState(
            mode=self.mode,
            aeration_phase=self.phase,
            schedule=self.schedule,
            last_aeration=self.last_aeration,
            gantry_pose=self.gantry.pose,
            spindle_spinning=self.gantry.spindle_spinning,
            path_mode=self.path_mode,
            fault_cause=self.fault_cause,
        )

    def tick(self, now: float, sensors: SensorFrame | None = None) -> list[tuple]:
        """Advance the machine by one tick; returns the actions it produced.

        Actions: ("START_AERATION",), ("LOG_FRAME", frame), ("EMIT_TELEMETRY",).
        At most one mode/phase transition happens per tick; faults are states,
        never exceptions.
        """
        if self._last_now is not None and now < self._last_now:
            raise ValueError(f"clock went backwards: {now} < {self._last_now}")
        self._last_now = now
        before = (self.mode, self.phase)
        actions: list[tuple] = []
        command = self._commands[0] if self._commands else None
        consumed = False
        if command is not None and self._apply_setting(command, now):
            command, consumed = None, True

        if self.mode == Mode.FAULT:
            if command is not None:
                consumed = True  # only STOP acts; others are rejected here
                if command.kind == CommandKind.STOP:
                    self._try_recover(now)
                else:
                    self._note(now, "COMMAND_REJECTED", command.kind.value)
        elif self.mode == Mode.AERATING:
            if command is not None:
                consumed = True  # a duplicate AERATE_NOW while busy is dropped
            self._advance_aeration(now, command)
        elif self.mode == Mode.SENSING:
            self.mode = Mode.IDLE  # queued commands wait for the IDLE tick
        else:  # IDLE
            if command is not None and command.kind == CommandKind.AERATE_NOW:
                consumed = True
                self._begin_aeration(now, scheduled=False)
                actions.append(("START_AERATION",))
            elif command is not None and command.kind == CommandKind.STOP:
                consumed = True  # STOP while idle is a no-op
            elif schedule_due(self.schedule, self._last_scheduled, now):
                self._begin_aeration(now, scheduled=True)
                actions.append(("START_AERATION",))
            elif self._sample_due(now):
                self.mode = Mode.SENSING
                self._last_sample = now
                if sensors is not None:
                    actions.append(("LOG_FRAME", sensors))

        if consumed:
            self._commands.pop(0)
        if (self.mode, self.phase) != before:
            actions.append(("EMIT_TELEMETRY",))
        return actions

    # -- internals -------------------------------------------------------------

    def _apply_setting(self, command: Command, now: float) -> bool:
        """Handle commands that adjust settings without a mode transition."""
        if command.kind == CommandKind.SET_SCHEDULE:
            self.schedule = command.payload
            self._note(now, "SET_SCHEDULE", command.payload)
            return True
        if command.kind == CommandKind.SET_PATH_MODE:
            self.path_mode = command.payload
            self._note(now, "SET_PATH_MODE", command.payload)
            return True
        return False

    def _sample_due(self, now: float) -> bool:
        return (
            self._last_sample is None
            or now - self._last_sample >= self.sample_interval_s
        )

    def _begin_aeration(self, now: float, scheduled: bool) -> None:
        self.mode = Mode.AERATING
        self.phase = Phase.HOMING
        self.last_aeration = now
        if scheduled:
            self._last_scheduled = now
        self._segment_index = 0
        self._carried = CartesianDelta(0.0, 0.0)
        self._path = None
        self._note(now, "START_AERATION", "scheduled" if scheduled else "on-demand")
        self._note(now, "PHASE", Phase.HOMING.value)

    def _enter_phase(self, now: float, phase: Phase) -> None:
        self.phase = phase
        self._note(now, "PHASE", phase.value)

    def _fault(self, now: float, cause: str) -> None:
        self.mode = Mode.FAULT
        self.phase = Phase.NONE
        self.fault_cause = cause
        try:
            self.gantry.spin_off()
        except Exception:
            pass
        self._note(now, "FAULT", cause)

    def _try_recover(self, now: float) -> None:
        """STOP in FAULT: retract, re-home, and leave FAULT only on end stops."""
        try:
            self.gantry.retract()
            self.gantry.return_home()
        except Exception as exc:
            self._note(now, "RECOVER_FAILED", str(exc))
            return
        if self.gantry.end_stop_x and self.gantry.end_stop_y:
            self.mode = Mode.IDLE
            self.phase = Phase.NONE
            self.fault_cause = None
            self._note(now, "RECOVERED")

    def _advance_aeration(self, now: float, command: Command | None) -> None:
        stop = command is not None and command.kind == CommandKind.STOP
        try:
            if self.phase == Phase.HOMING:
                self.gantry.retract()
                self.gantry.return_home()
                if not self.gantry.at_home:
                    self._fault(now, "homing failed")
                    return
                self._enter_phase(now, Phase.PLUNGING)
            elif self.phase == Phase.PLUNGING:
                if stop:
                    self._enter_phase(now, Phase.RETRACTING)
                    return
                self._path = self.path_supplier(self.path_mode)
                x0, y0 = self._path.waypoints[0]
                self.gantry.move_to(x0, y0)
                self.gantry.plunge(self._path.plunge_depth)
                self.gantry.spin_on()
                self._segment_index = 1
                self._enter_phase(now, Phase.MIXING)
            elif self.phase == Phase.MIXING:
                if stop:
                    self.gantry.spin_off()
                    self._enter_phase(now, Phase.RETRACTING)
                    return
                self._stream_segment()
                if self._segment_index >= len(self._path.waypoints):
                    self.gantry.spin_off()
                    self._enter_phase(now, Phase.RETRACTING)
            elif self.phase == Phase.RETRACTING:
                self.gantry.retract()
                self._enter_phase(now, Phase.RETURNING)
                self._returning_since = now
            elif self.phase == Phase.RETURNING:
                self.gantry.return_home()
                if self.gantry.end_stop_x and self.gantry.end_stop_y:
                    self._note(now, "END_STOP")
                    self.mode = Mode.IDLE
                    self.phase = Phase.NONE
                    self._note(now, "AERATION_DONE")
                elif now - self._returning_since > self.endstop_timeout_s:
                    self._fault(now, "end-stop timeout")
        except Exception as exc:  # gantry errors become FAULT, not exceptions
            self._fault(now, str(exc))

    def _stream_segment(self) -> None:
        """Quantize one path segment to motor steps and move the gantry."""
        x, y = self._path.waypoints[self._segment_index]
        gx, gy, _ = self.gantry.pose
        want = CartesianDelta(
            x - gx + self._carried.delta_x, y - gy + self._carried.delta_y
        )
        steps_a, steps_b, residual = cartesian_to_steps(want, self.motor)
        self._carried = residual
        self.total_steps += abs(steps_a) + abs(steps_b)
        self.gantry.move_to(x, y)
        self._segment_index += 1

    def _note(self, now: float, event: str, *args: str) -> None:
        self.trace.append((now, event, *args))
