"""Desk-scale substrate/gantry simulator for closed-loop testing.

Models a larvae-density grid over the bin, synthetic sensors, a thermal
camera, and a virtual CoreXY gantry, so the controller can run end to end
with no hardware attached. Biology parameters are synthetic, chosen for
plausible closed-loop behavior, not fitted to real larvae.
"""

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .config import ConfigError, parse_kv_file
from .planner import ToolPath
from .types import BinGeometry, SensorFrame, SpindleSpec
from .vision import celsius_to_raw

DEFAULT_GROWTH_RATE_PER_H = math.log(10.0) / 288.0  # mass x10 over 12 days
DEFAULT_DRIFT_STRENGTH = 0.05  # per hour, preferential-attachment clustering
DEFAULT_NOISE_AMP = 0.02  # multiplicative density jitter per biology step
DEFAULT_MOISTURE_DECAY_PER_H = 0.05 / 24.0  # ~5% per day

# synthetic sensor model: baselines and sensitivities (documented, not fitted)
SENSOR_CO2_BASE_PPM = 420.0
SENSOR_CO2_PER_MASS = 5.0
SENSOR_TEMP_PER_MEAN_DENSITY = 30.0
SENSOR_HUMIDITY_BASE = 50.0
SENSOR_HUMIDITY_PER_MOISTURE = 40.0
SENSOR_PH_CENTER = 7.2
SENSOR_PH_SWING = 0.8
SENSOR_PH_PERIOD_S = 10 * 86400.0
SENSOR_NO2_BASE_PPM = 0.02
SENSOR_NO2_PER_MASS = 0.0005
SENSOR_NOISE = {"temp": 0.05, "humidity": 0.5, "moisture": 0.002,
                "ph": 0.02, "co2": 2.0, "no2": 0.001}

THERMAL_HEAT_GAIN = 10.0  # deg C per mass unit per cell, after blur
THERMAL_NOISE_C = 0.1
_BLUR_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0  # small Gaussian


class SimulationError(ValueError):
    pass


class GantryError(RuntimeError):
    pass


@dataclass(frozen=True)
class SubstrateState:
    """Larvae-density and moisture grids; rows map to Y, columns to X."""

    density: np.ndarray
    moisture: np.ndarray
    resolution: float  # meters per cell
    total_mass: float

    def __post_init__(self):
        for name in ("density", "moisture"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if (self.density < 0).any():
            raise SimulationError("density cells must be >= 0")
        if not math.isclose(
            float(self.density.sum()), self.total_mass, rel_tol=1e-9, abs_tol=1e-12
        ):
            raise SimulationError("total_mass does not match the density grid")

    @property
    def shape(self) -> tuple[int, int]:
        return self.density.shape


@dataclass(frozen=True)
class BiologyParams:
    growth_rate_per_h: float = DEFAULT_GROWTH_RATE_PER_H
    drift_strength: float = DEFAULT_DRIFT_STRENGTH
    noise_amp: float = DEFAULT_NOISE_AMP
    moisture_decay_per_h: float = DEFAULT_MOISTURE_DECAY_PER_H


def new_substrate(
    geometry: BinGeometry,
    resolution: float,
    total_mass: float,
    clusters: int,
    rng: np.random.Generator,
    moisture: float = 0.7,
) -> SubstrateState:
    """Seeded initial state: `clusters` Gaussian blobs inside the working area."""
    if not resolution > 0:
        raise SimulationError("resolution must be > 0")
    if not total_mass > 0:
        raise SimulationError("total_mass must be > 0")
    ny = max(1, round(geometry.y_len / resolution))
    nx = max(1, round(geometry.x_len / resolution))
    density = np.zeros((ny, nx))
    rows, cols = np.indices((ny, nx))
    sigma = max(2.0, 0.015 / resolution)  # ~15 mm blobs
    for _ in range(max(1, clusters)):
        cx = rng.uniform(geometry.margin, geometry.x_len - geometry.margin)
        cy = rng.uniform(geometry.margin, geometry.y_len - geometry.margin)
        r0, c0 = cy / resolution - 0.5, cx / resolution - 0.5
        density += np.exp(-((rows - r0) ** 2 + (cols - c0) ** 2) / (2 * sigma**2))
    density *= total_mass / density.sum()
    return SubstrateState(
        density=density,
        moisture=np.full((ny, nx), moisture),
        resolution=resolution,
        total_mass=total_mass,
    )


def _clustering_flux(density: np.ndarray, strength: float) -> np.ndarray:
    """Mass exchange biased toward denser 4-neighbors; exactly conservative.

    Each cell sends its richer neighbor a share of its own mass scaled by
    the relative density advantage; total per-cell outflow is capped at
    half the cell so the update stays stable for any step size.
    """
    eps = 1e-30
    out = np.zeros_like(density)
    fluxes = []
    shifts = ((-1, 0), (1, 0), (0, -1), (0, 1))
    for dr, dc in shifts:
        flux = np.zeros_like(density)
        src = (slice(max(0, -dr), density.shape[0] - max(0, dr)),
               slice(max(0, -dc), density.shape[1] - max(0, dc)))
        dst = (slice(max(0, dr), density.shape[0] - max(0, -dr)),
               slice(max(0, dc), density.shape[1] - max(0, -dc)))
        d_src = density[src]
        d_dst = density[dst]
        advantage = np.clip((d_dst - d_src) / (d_dst + d_src + eps), 0.0, None)
        flux[src] = strength * d_src * advantage
        out += flux
        fluxes.append((flux, src, dst))
    scale = np.ones_like(density)
    busy = out > 0.5 * density
    scale[busy] = 0.5 * density[busy] / out[busy]
    new = density.copy()
    for flux, src, dst in fluxes:
        moved = flux * scale
        new -= moved
        new[dst] += moved[src]
    return new


def step_biology(
    s: SubstrateState,
    dt_hours: float,
    params: BiologyParams = BiologyParams(),
    rng: np.random.Generator | None = None,
) -> SubstrateState:
    """Advance growth and clustering by dt_hours.

    Total mass is multiplied by exactly exp(growth_rate*dt); the clustering
    drift and seeded noise redistribute mass without creating or losing any.
    """
    if not dt_hours > 0:
        raise SimulationError("dt_hours must be > 0")
    density = _clustering_flux(s.density, params.drift_strength * dt_hours)
    if rng is not None and params.noise_amp > 0:
        density = density * (1.0 + params.noise_amp * rng.uniform(-1, 1, s.shape))
        density = np.clip(density, 0.0, None)
    target = s.total_mass * math.exp(params.growth_rate_per_h * dt_hours)
    total = density.sum()
    if total > 0:
        density *= target / total
    else:
        density = np.full(s.shape, target / density.size)
    moisture = s.moisture * math.exp(-params.moisture_decay_per_h * dt_hours)
    return SubstrateState(density, moisture, s.resolution, target)


def _segment_distances(
    s: SubstrateState, path: ToolPath
) -> np.ndarray:
    ny, nx = s.shape
    res = s.resolution
    xs = (np.arange(nx) + 0.5) * res
    ys = (np.arange(ny) + 0.5) * res
    gx, gy = np.meshgrid(xs, ys)
    dist = np.full((ny, nx), np.inf)
    for (x0, y0), (x1, y1) in zip(path.waypoints[:-1], path.waypoints[1:]):
        dx, dy = x1 - x0, y1 - y0
        seg2 = dx * dx + dy * dy
        if seg2 == 0:
            d = np.hypot(gx - x0, gy - y0)
        else:
            t = np.clip(((gx - x0) * dx + (gy - y0) * dy) / seg2, 0.0, 1.0)
            d = np.hypot(gx - (x0 + t * dx), gy - (y0 + t * dy))
        np.minimum(dist, d, out=dist)
    return dist


def swept_mask(s: SubstrateState, path: ToolPath, spec: SpindleSpec) -> np.ndarray:
    """Cells whose centers lie within the spindle sweep radius of the path."""
    return _segment_distances(s, path) <= spec.sweep_radius


def _box_sum(arr: np.ndarray, k: int) -> np.ndarray:
    """Sliding (2k+1)^2 window sum with zero padding, via summed-area table."""
    padded = np.zeros((arr.shape[0] + 2 * k + 1, arr.shape[1] + 2 * k + 1))
    padded[k + 1 : k + 1 + arr.shape[0], k + 1 : k + 1 + arr.shape[1]] = arr
    sat = padded.cumsum(axis=0).cumsum(axis=1)
    size = 2 * k + 1
    return (
        sat[size:, size:]
        - sat[:-size, size:]
        - sat[size:, :-size]
        + sat[:-size, :-size]
    )


def apply_spindle(
    s: SubstrateState, path: ToolPath, spec: SpindleSpec
) -> SubstrateState:
    """Mix every swept cell toward its local box-window mean.

    The update is a symmetric doubly-stochastic exchange restricted to the
    swept set, so mass is conserved exactly, untouched cells stay untouched,
    and the density variance over the swept region can only decrease. In
    the interior of the swept band it reduces to the plain box-kernel mean.
    """
    swept = swept_mask(s, path, spec)
    if not swept.any():
        return s
    k = max(1, round(spec.sweep_radius / s.resolution))
    weight = float((2 * k + 1) ** 2)
    d = s.density
    masked = np.where(swept, d, 0.0)
    neighbor_sum = _box_sum(masked, k) - masked
    neighbor_n = _box_sum(swept.astype(np.float64), k) - swept
    new = d.copy()
    new[swept] = d[swept] + (neighbor_sum[swept] - neighbor_n[swept] * d[swept]) / weight
    new = np.clip(new, 0.0, None)
    moist = s.moisture.copy()
    m_masked = np.where(swept, s.moisture, 0.0)
    m_sum = _box_sum(m_masked, k) - m_masked
    moist[swept] = s.moisture[swept] + (
        m_sum[swept] - neighbor_n[swept] * s.moisture[swept]
    ) / weight
    return SubstrateState(new, moist, s.resolution, float(new.sum()))


def dispersal_index(s: SubstrateState) -> float:
    """Coefficient of variation of the density grid; 0 means fully uniform."""
    if not s.total_mass > 0:
        raise SimulationError("dispersal_index needs total_mass > 0")
    mean = s.density.mean()
    return float(s.density.std(ddof=0) / mean)


def render_thermal(
    s: SubstrateState,
    noise_seed: int,
    ambient_c: float = 25.0,
    heat_gain: float = THERMAL_HEAT_GAIN,
) -> np.ndarray:
    """Synthetic radiometric frame: ambient plus blurred density heat.

    Deterministic per seed; returns uint16 centikelvin counts.
    """
    blurred = s.density
    for axis in (0, 1):
        blurred = np.apply_along_axis(
            lambda m: np.convolve(m, _BLUR_KERNEL, mode="same"), axis, blurred
        )
    rng = np.random.default_rng(noise_seed)
    t = ambient_c + heat_gain * blurred + THERMAL_NOISE_C * rng.uniform(-1, 1, s.shape)
    return celsius_to_raw(t)


def sample_sensors(
    s: SubstrateState, t: float, seed: int, ambient_c: float = 25.0
) -> SensorFrame:
    """Synthetic sensor pack: deterministic curves plus bounded seeded noise."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, int(t)]))
    noise = {key: rng.uniform(-amp, amp) for key, amp in SENSOR_NOISE.items()}
    mean_density = s.total_mass / s.density.size
    moisture_mean = float(s.moisture.mean())
    ph = (
        SENSOR_PH_CENTER
        + SENSOR_PH_SWING * math.sin(2 * math.pi * t / SENSOR_PH_PERIOD_S)
        + noise["ph"]
    )
    return SensorFrame(
        timestamp=t,
        temperature=ambient_c + SENSOR_TEMP_PER_MEAN_DENSITY * mean_density + noise["temp"],
        humidity=SENSOR_HUMIDITY_BASE
        + SENSOR_HUMIDITY_PER_MOISTURE * moisture_mean
        + noise["humidity"],
        moisture=float(np.clip(moisture_mean + noise["moisture"], 0.0, 1.0)),
        ph=min(max(ph, 0.0), 14.0),
        co2=SENSOR_CO2_BASE_PPM + SENSOR_CO2_PER_MASS * s.total_mass + noise["co2"],
        no2=max(0.0, SENSOR_NO2_BASE_PPM + SENSOR_NO2_PER_MASS * s.total_mass + noise["no2"]),
    )


class VirtualGantry:
    """Stateful stand-in for the CoreXY rig: pose, spindle, and end stops.

    Home is (0, 0) with the spindle fully retracted (z = 0); Z grows downward
    into the substrate. One end stop per axis sits at the home end; setting
    fail_end_stop simulates a broken switch that never reports.
    """

    POSE_TOL = 1e-9

    def __init__(self, x_max: float, y_max: float, z_max: float):
        self.x_max = x_max
        self.y_max = y_max
        self.z_max = z_max
        self.x = 0.0
        self.y = 0.0
        self.z = 0.0
        self.spindle_spinning = False
        self.fail_end_stop = False

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @property
    def end_stop_x(self) -> bool:
        return not self.fail_end_stop and abs(self.x) <= self.POSE_TOL

    @property
    def end_stop_y(self) -> bool:
        return not self.fail_end_stop and abs(self.y) <= self.POSE_TOL

    @property
    def end_stop_z(self) -> bool:
        return not self.fail_end_stop and abs(self.z) <= self.POSE_TOL

    @property
    def at_home(self) -> bool:
        return (
            abs(self.x) <= self.POSE_TOL
            and abs(self.y) <= self.POSE_TOL
            and abs(self.z) <= self.POSE_TOL
        )

    def move_to(self, x: float, y: float) -> None:
        if not (0.0 <= x <= self.x_max and 0.0 <= y <= self.y_max):
            raise GantryError(f"move to ({x:.4f}, {y:.4f}) exceeds mechanical limits")
        self.x, self.y = x, y

    def plunge(self, depth: float) -> None:
        if not 0.0 <= depth <= self.z_max:
            raise GantryError(f"plunge {depth:.4f} m exceeds Z travel {self.z_max} m")
        self.z = depth

    def retract(self) -> None:
        self.z = 0.0

    def spin_on(self) -> None:
        self.spindle_spinning = True

    def spin_off(self) -> None:
        self.spindle_spinning = False

    def return_home(self) -> None:
        self.x = 0.0
        self.y = 0.0


def gantry_execute(gv: VirtualGantry, path: ToolPath) -> list[tuple]:
    """One-shot aeration pass; returns the ordered motion event trace.

    The carriage transits (retracted) to the first waypoint as part of the
    plunge step, so MOVE events correspond one-to-one to path segments.
    """
    if not gv.at_home:
        raise GantryError("gantry must be homed before executing a path")
    events: list[tuple] = []
    x0, y0 = path.waypoints[0]
    gv.move_to(x0, y0)
    gv.plunge(path.plunge_depth)
    events.append(("PLUNGE", x0, y0, path.plunge_depth))
    gv.spin_on()
    events.append(("SPIN_ON",))
    for x, y in path.waypoints[1:]:
        gv.move_to(x, y)
        events.append(("MOVE", x, y))
    gv.spin_off()
    events.append(("SPIN_OFF",))
    gv.retract()
    events.append(("RETRACT",))
    gv.return_home()
    if gv.end_stop_x and gv.end_stop_y:
        events.append(("END_STOP",))
    events.append(("HOME",))
    return events


@dataclass(frozen=True)
class Scenario:
    """Closed-loop scenario inputs (see docs/config-schema.md for the file format)."""

    seed: int = 42
    days: float = 10.0
    initial_mass: float = 100.0
    clusters: int = 5
    growth_rate_per_h: float = DEFAULT_GROWTH_RATE_PER_H
    drift_strength: float = DEFAULT_DRIFT_STRENGTH
    noise_amp: float = DEFAULT_NOISE_AMP

    def biology(self) -> BiologyParams:
        return BiologyParams(
            growth_rate_per_h=self.growth_rate_per_h,
            drift_strength=self.drift_strength,
            noise_amp=self.noise_amp,
        )


def load_scenario(path: str | os.PathLike) -> Scenario:
    entries = parse_kv_file(path)
    known = {
        "seed": int,
        "days": float,
        "initial_mass": float,
        "clusters": int,
        "growth_rate_per_h": float,
        "drift_strength": float,
        "noise_amp": float,
    }
    kwargs = {}
    for key, raw in entries.items():
        if key not in known:
            raise ConfigError(f"unknown scenario key {key!r}")
        try:
            kwargs[key] = known[key](raw)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    scenario = Scenario(**kwargs)
    if scenario.days <= 0:
        raise ConfigError("days: must be > 0")
    if scenario.initial_mass <= 0:
        raise ConfigError("initial_mass: must be > 0")
    return scenario
