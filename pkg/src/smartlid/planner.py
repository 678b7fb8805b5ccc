"""Coverage-path generation and first-principles actuator sizing.

Paths are polylines in bin coordinates (meters, origin at the bin corner,
home at the bottom-left of the working area). Raster lanes run along X,
the longer axis of the default bin.
"""

import math
import os
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .types import BinGeometry, SpindleSpec, SubstrateRheology

if TYPE_CHECKING:
    from .vision import ComponentSet

# defaults applied when the caller does not thread config values through
DEFAULT_TRAVEL_SPEED = 0.032  # m/s
DEFAULT_PLUNGE_DEPTH = 0.08  # m
DEFAULT_SPIN_RATE = 1.0  # rev/s

SPIRAL_STEP_DEG = 10.0  # fixed angular discretization per segment
TARGET_RADIUS_GAIN = 1.0  # k in radius = k * sqrt(area_px) * pixel_pitch
TARGET_TURN_SPACING = 0.02  # m of radius per spiral turn in targeted mode

_BOUND_TOL = 1e-12


class PlanningError(ValueError):
    """The requested path cannot be generated for this geometry."""


@dataclass(frozen=True)
class ToolPath:
    """Ordered waypoints plus plunge/retract semantics for one aeration job."""

    waypoints: tuple[tuple[float, float], ...]
    plunge_depth: float
    travel_speed: float
    spindle_spin_rate: float

    def __post_init__(self):
        object.__setattr__(
            self, "waypoints", tuple((float(x), float(y)) for x, y in self.waypoints)
        )
        if len(self.waypoints) < 2:
            raise PlanningError("a tool path needs at least 2 waypoints")
        if not self.travel_speed > 0:
            raise PlanningError("travel_speed must be > 0")


@dataclass(frozen=True)
class DragEstimate:
    """Stokes-drag sizing output for the spindle moving through substrate."""

    per_finger_force: float  # N
    total_force: float  # N
    required_torque: float  # N*m


@dataclass(frozen=True)
class FeasibilityReport:
    passed: bool
    required_torque: float
    allowed_torque: float
    holding_torque: float
    safety_factor: float


def _check_bounds(
    waypoints: list[tuple[float, float]], g: BinGeometry, what: str
) -> None:
    x_lo, x_hi = g.margin, g.x_len - g.margin
    y_lo, y_hi = g.margin, g.y_len - g.margin
    for x, y in waypoints:
        if not (
            x_lo - _BOUND_TOL <= x <= x_hi + _BOUND_TOL
            and y_lo - _BOUND_TOL <= y <= y_hi + _BOUND_TOL
        ):
            raise PlanningError(
                f"{what} leaves the working area at ({x:.4f}, {y:.4f})"
            )


def raster_lane_count(g: BinGeometry, pitch: float) -> int:
    """Number of boustrophedon lanes for the given pitch.

    ceil(working_y/pitch) + 1 lanes, so the first and last lanes sit on the
    working-area edges; a 1e-9 slack absorbs float noise in the quotient.
    """
    if not pitch > 0:
        raise PlanningError("pitch must be > 0")
    if pitch > g.working_y:
        raise PlanningError(
            f"pitch {pitch} m too large for working height {g.working_y} m"
        )
    return math.ceil(g.working_y / pitch - 1e-9) + 1


def plan_raster(
    g: BinGeometry,
    pitch: float,
    *,
    travel_speed: float = DEFAULT_TRAVEL_SPEED,
    plunge_depth: float = DEFAULT_PLUNGE_DEPTH,
    spin_rate: float = DEFAULT_SPIN_RATE,
) -> ToolPath:
    """Serpentine coverage path: lanes along X, starting at the home corner.

    Lane spacing is working_y/(lanes-1), which equals the requested pitch
    whenever the pitch divides the working height; it is never larger, so
    every working-area point lies within pitch/2 of a lane.
    """
    lanes = raster_lane_count(g, pitch)
    x_left, x_right = g.margin, g.x_len - g.margin
    y_top = g.y_len - g.margin
    spacing = g.working_y / (lanes - 1)
    waypoints: list[tuple[float, float]] = []
    for i in range(lanes):
        y = y_top if i == lanes - 1 else g.margin + i * spacing
        if i % 2 == 0:
            waypoints += [(x_left, y), (x_right, y)]
        else:
            waypoints += [(x_right, y), (x_left, y)]
    _check_bounds(waypoints, g, "raster path")
    return ToolPath(tuple(waypoints), plunge_depth, travel_speed, spin_rate)


def _spiral_points(
    center: tuple[float, float], radius: float, turns: int
) -> list[tuple[float, float]]:
    cx, cy = center
    steps = int(round(turns * 360.0 / SPIRAL_STEP_DEG))
    pts = []
    for i in range(steps + 1):
        theta = math.radians(i * SPIRAL_STEP_DEG)
        r = radius * theta / (2.0 * math.pi * turns)
        pts.append((cx + r * math.cos(theta), cy + r * math.sin(theta)))
    return pts


def plan_spiral(
    center: tuple[float, float],
    radius: float,
    turns: int,
    g: BinGeometry,
    *,
    travel_speed: float = DEFAULT_TRAVEL_SPEED,
    plunge_depth: float = DEFAULT_PLUNGE_DEPTH,
    spin_rate: float = DEFAULT_SPIN_RATE,
) -> ToolPath:
    """Archimedean spiral from the center outward, 10 degrees per segment.

    The spiral is bounds-checked, never silently clipped.
    """
    if not radius > 0:
        raise PlanningError("degenerate spiral: radius must be > 0")
    if turns < 1:
        raise PlanningError("turns must be >= 1")
    pts = _spiral_points(center, radius, turns)
    _check_bounds(pts, g, "spiral")
    return ToolPath(tuple(pts), plunge_depth, travel_speed, spin_rate)


@dataclass(frozen=True)
class PixelToBinMap:
    """Affine map from image pixel coordinates to bin coordinates.

    x = x0 + (col + 0.5) * x_scale, y = y0 + (row + 0.5) * y_scale, i.e.
    pixel centers map into the bin; row 0 is the y = y0 edge.
    """

    x0: float
    y0: float
    x_scale: float  # m per pixel column
    y_scale: float  # m per pixel row

    @classmethod
    def full_bin(cls, g: BinGeometry, width: int, height: int) -> "PixelToBinMap":
        """Camera that sees exactly the whole bin interior."""
        return cls(0.0, 0.0, g.x_len / width, g.y_len / height)

    def to_bin(self, row: float, col: float) -> tuple[float, float]:
        return (self.x0 + (col + 0.5) * self.x_scale,
                self.y0 + (row + 0.5) * self.y_scale)

    @property
    def pixel_pitch(self) -> float:
        """Isotropic meters-per-pixel (geometric mean of the two scales)."""
        return math.sqrt(self.x_scale * self.y_scale)


def plan_targeted(
    clusters: "ComponentSet",
    g: BinGeometry,
    image_to_bin: PixelToBinMap,
    *,
    travel_speed: float = DEFAULT_TRAVEL_SPEED,
    plunge_depth: float = DEFAULT_PLUNGE_DEPTH,
    spin_rate: float = DEFAULT_SPIN_RATE,
) -> ToolPath:
    """Local spirals over larvae clusters, largest first, joined by transits.

    Spiral radius is TARGET_RADIUS_GAIN * sqrt(area_px) * pixel_pitch. The
    center is clamped into the working area and the radius shrunk to the
    wall clearance, so arbitrary vision output always yields a legal path.
    """
    comps = sorted(clusters.components, key=lambda c: c.area, reverse=True)
    if not comps:
        raise PlanningError("nothing to target: no clusters in component set")
    x_lo, x_hi = g.margin, g.x_len - g.margin
    y_lo, y_hi = g.margin, g.y_len - g.margin
    waypoints: list[tuple[float, float]] = []
    for comp in comps:
        row, col = comp.centroid
        cx, cy = image_to_bin.to_bin(row, col)
        cx = min(max(cx, x_lo), x_hi)
        cy = min(max(cy, y_lo), y_hi)
        radius = TARGET_RADIUS_GAIN * math.sqrt(comp.area) * image_to_bin.pixel_pitch
        clearance = min(cx - x_lo, x_hi - cx, cy - y_lo, y_hi - cy)
        radius = min(radius, clearance)
        if radius > 0:
            turns = max(1, math.ceil(radius / TARGET_TURN_SPACING))
            waypoints.extend(_spiral_points((cx, cy), radius, turns))
        else:
            waypoints.append((cx, cy))
    if len(waypoints) == 1:
        waypoints.append(waypoints[0])  # single poke: plunge and retract in place
    _check_bounds(waypoints, g, "targeted path")
    return ToolPath(tuple(waypoints), plunge_depth, travel_speed, spin_rate)


def path_length(p: ToolPath) -> float:
    """Total Euclidean length of the waypoint polyline, meters."""
    return sum(
        math.hypot(x1 - x0, y1 - y0)
        for (x0, y0), (x1, y1) in zip(p.waypoints[:-1], p.waypoints[1:])
    )


def min_speed(length: float, time_budget: float) -> float:
    """Slowest travel speed that finishes `length` within `time_budget`.

    Returns the exact quotient; feasibility margins are applied elsewhere.
    """
    if not (math.isfinite(length) and length > 0):
        raise ValueError(f"length must be positive and finite, got {length}")
    if not (math.isfinite(time_budget) and time_budget > 0):
        raise ValueError(
            f"time_budget must be positive and finite, got {time_budget}"
        )
    return length / time_budget


def stokes_drag(r: SubstrateRheology, s: SpindleSpec, v: float) -> DragEstimate:
    """Viscous drag sizing: per-finger force 6*pi*mu*R*v.

    Torque is the sum of per-finger force times each finger's radial offset,
    i.e. the spindle-axis load while the carriage translates at v.
    """
    if v < 0:
        raise ValueError(f"speed must be >= 0, got {v}")
    per_finger = 6.0 * math.pi * r.dynamic_viscosity * s.finger_radius * v
    total = s.finger_count * per_finger
    torque = per_finger * sum(s.finger_offsets)
    return DragEstimate(per_finger, total, torque)


def motor_feasibility(
    d: DragEstimate, holding_torque: float, safety_factor: float = 0.5
) -> FeasibilityReport:
    """Pass iff the required torque fits within the derated holding torque."""
    allowed = safety_factor * holding_torque
    return FeasibilityReport(
        passed=d.required_torque <= allowed,
        required_torque=d.required_torque,
        allowed_torque=allowed,
        holding_torque=holding_torque,
        safety_factor=safety_factor,
    )


def export_waypoints(p: ToolPath, path: str | os.PathLike) -> None:
    """Write the polyline as plain text, one 'x y' pair per line (m, 6 dp)."""
    with open(path, "w", encoding="utf-8") as fh:
        for x, y in p.waypoints:
            fh.write(f"{x:.6f} {y:.6f}\n")
