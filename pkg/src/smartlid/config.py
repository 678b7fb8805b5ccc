"""Configuration loading.

The config file is a flat, human-readable key/value document:

    # comment
    bin.x_len = 0.48 m
    spindle.finger_offsets = 4, 6, 7, 8, 9, 10, 13, 27 mm

Values may carry an explicit unit suffix; everything is converted to SI
(meters, seconds, Pa*s) at this boundary. The full schema lives in
docs/config-schema.md and the shipped default in data/default.cfg.
"""

import importlib.resources
import os
import re
from dataclasses import dataclass

from .kinematics import MotorSpec
from .types import BinGeometry, InvariantError, SpindleSpec, SubstrateRheology

# unit suffix -> factor to SI; temperatures (C) pass through unscaled
_UNIT_FACTORS = {
    "m": 1.0,
    "cm": 1e-2,
    "mm": 1e-3,
    "s": 1.0,
    "min": 60.0,
    "h": 3600.0,
    "Pa.s": 1.0,
    "cps": 1e-3,  # centipoise; 250,000 cps = 250 Pa*s
    "rev/s": 1.0,
    "rpm": 1.0 / 60.0,
    "N.m": 1.0,
    "N.cm": 1e-2,
    "C": 1.0,
    "ppm": 1.0,
}

_HHMM_RE = re.compile(r"^([01]\d|2[0-3]):([0-5]\d)$")


class ConfigError(ValueError):
    """Missing file, schema violation, or invariant violation in a config."""


def parse_kv_file(path: str | os.PathLike) -> dict[str, str]:
    """Read a key/value document into a dict of raw value strings."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    return parse_kv_text(text)


def parse_kv_text(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def _split_unit(field: str, raw: str) -> tuple[str, float]:
    """Split '7.5 mm' into the numeric part and its SI factor."""
    parts = raw.split()
    if len(parts) == 1:
        return parts[0], 1.0
    if len(parts) == 2:
        number, unit = parts
        if unit not in _UNIT_FACTORS:
            raise ConfigError(f"{field}: unknown unit {unit!r}")
        return number, _UNIT_FACTORS[unit]
    raise ConfigError(f"{field}: cannot parse value {raw!r}")


class _Reader:
    """Pulls typed values out of the raw entry dict, tracking what was used."""

    def __init__(self, entries: dict[str, str]):
        self.entries = dict(entries)
        self.used: set[str] = set()

    def _raw(self, field: str, default) -> str | None:
        if field in self.entries:
            self.used.add(field)
            return self.entries[field]
        if default is _REQUIRED:
            raise ConfigError(f"{field}: required key is missing")
        return None

    def number(self, field: str, default=None) -> float:
        raw = self._raw(field, default)
        if raw is None:
            return default
        number, factor = _split_unit(field, raw)
        try:
            return float(number) * factor
        except ValueError:
            raise ConfigError(f"{field}: not a number: {number!r}") from None

    def integer(self, field: str, default=None) -> int:
        value = self.number(field, default)
        if value != int(value):
            raise ConfigError(f"{field}: expected an integer, got {value}")
        return int(value)

    def number_list(self, field: str, default=None) -> tuple[float, ...]:
        raw = self._raw(field, default)
        if raw is None:
            return default
        # one optional unit suffix at the end applies to every element
        parts = raw.split()
        factor = 1.0
        if parts and parts[-1] in _UNIT_FACTORS:
            factor = _UNIT_FACTORS[parts[-1]]
            raw = " ".join(parts[:-1])
        items = [item.strip() for item in raw.split(",") if item.strip()]
        try:
            return tuple(float(item) * factor for item in items)
        except ValueError:
            raise ConfigError(f"{field}: cannot parse number list {raw!r}") from None

    def time_of_day(self, field: str, default=None) -> str:
        raw = self._raw(field, default)
        if raw is None:
            return default
        if not _HHMM_RE.match(raw):
            raise ConfigError(f"{field}: expected HH:MM (00:00..23:59), got {raw!r}")
        return raw

    def unknown_keys(self) -> set[str]:
        return set(self.entries) - self.used


_REQUIRED = object()


@dataclass(frozen=True)
class ScheduleSettings:
    daily_time: str  # "HH:MM", local clock of the injected time source
    sample_interval_s: float
    endstop_timeout_s: float
    vision_interval_s: float


@dataclass(frozen=True)
class PlannerSettings:
    raster_pitch: float  # m
    time_budget_s: float
    safety_factor: float
    holding_torque: float  # N*m


@dataclass(frozen=True)
class VisionSettings:
    window_low_c: float
    window_high_c: float
    mixed_delta: int  # inter-frame intensity change marking a "mixed" pixel
    min_component_area: int  # px; speckle filter before the growth proxy


@dataclass(frozen=True)
class SimSettings:
    grid_resolution: float  # m per cell
    ambient_c: float


@dataclass(frozen=True)
class Config:
    geometry: BinGeometry
    spindle: SpindleSpec
    substrate: SubstrateRheology
    motor: MotorSpec
    schedule: ScheduleSettings
    planner: PlannerSettings
    vision: VisionSettings
    sim: SimSettings


def load_config(path: str | os.PathLike) -> Config:
    """Load and validate a config file; raises ConfigError naming the field."""
    return _build_config(parse_kv_file(path))


def load_config_text(text: str) -> Config:
    return _build_config(parse_kv_text(text))


def default_config() -> Config:
    """The shipped default configuration (data/default.cfg)."""
    text = (
        importlib.resources.files("smartlid.data")
        .joinpath("default.cfg")
        .read_text(encoding="utf-8")
    )
    return _build_config(parse_kv_text(text))


def _build_config(entries: dict[str, str]) -> Config:
    r = _Reader(entries)
    try:
        geometry = BinGeometry(
            x_len=r.number("bin.x_len", _REQUIRED),
            y_len=r.number("bin.y_len", _REQUIRED),
            z_depth=r.number("bin.z_depth", _REQUIRED),
            margin=r.number("bin.margin", _REQUIRED),
        )
        finger_count = r.integer("spindle.finger_count", _REQUIRED)
        if finger_count < 1:
            raise ConfigError("spindle.finger_count: finger_count must be >= 1")
        spindle = SpindleSpec(
            finger_count=finger_count,
            finger_radius=r.number("spindle.finger_radius", _REQUIRED),
            finger_offsets=r.number_list("spindle.finger_offsets", _REQUIRED),
            spin_rate=r.number("spindle.spin_rate", 1.0),
            plunge_depth=r.number("spindle.plunge_depth", _REQUIRED),
        )
        spindle.validate_against(geometry)
        substrate = SubstrateRheology(
            dynamic_viscosity=r.number("substrate.viscosity", _REQUIRED)
        )
        motor = MotorSpec(
            steps_per_rev=r.integer("motor.steps_per_rev", 200),
            pulley_circumference=r.number("motor.pulley_circumference", 0.040),
            lead_screw_pitch=r.number("motor.lead_screw_pitch", 0.008),
        )
        schedule = ScheduleSettings(
            daily_time=r.time_of_day("schedule.daily_time", "11:00"),
            sample_interval_s=r.number("schedule.sample_interval", 300.0),
            endstop_timeout_s=r.number("schedule.endstop_timeout", 120.0),
            vision_interval_s=r.number("schedule.vision_interval", 3600.0),
        )
        planner = PlannerSettings(
            raster_pitch=r.number("planner.raster_pitch", 0.08),
            time_budget_s=r.number("planner.time_budget", 60.0),
            safety_factor=r.number("planner.safety_factor", 0.5),
            holding_torque=r.number("motor.holding_torque", 0.20),
        )
        vision = VisionSettings(
            window_low_c=r.number("vision.window_low", 20.0),
            window_high_c=r.number("vision.window_high", 45.0),
            mixed_delta=r.integer("vision.mixed_delta", 20),
            min_component_area=r.integer("vision.min_component_area", 25),
        )
        sim = SimSettings(
            grid_resolution=r.number("sim.grid_resolution", 0.005),
            ambient_c=r.number("sim.ambient_c", 25.0),
        )
    except InvariantError as exc:
        raise ConfigError(str(exc)) from None
    unknown = r.unknown_keys()
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if vision.window_low_c >= vision.window_high_c:
        raise ConfigError("vision.window_low: must be below vision.window_high")
    return Config(geometry, spindle, substrate, motor, schedule, planner, vision, sim)
