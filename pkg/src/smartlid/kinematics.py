"""CoreXY belt/Cartesian transforms, step quantization, and Z lead-screw math.

The two belt motors drive the carriage differentially: a carriage move
(dx, dy) needs belt translations da = dx + dy and db = dx - dy, so both
motors turn for any nonzero motion. Axis convention: Z points down into
the substrate; plunge depths are positive-down.
"""

import math
from dataclasses import dataclass

from .types import InvariantError


@dataclass(frozen=True)
class BeltDelta:
    """Linear translations of the two belts, meters."""

    delta_a: float
    delta_b: float

    def __post_init__(self):
        if not (math.isfinite(self.delta_a) and math.isfinite(self.delta_b)):
            raise InvariantError("belt deltas must be finite")


@dataclass(frozen=True)
class CartesianDelta:
    """Translation of the tool carriage, meters."""

    delta_x: float
    delta_y: float

    def __post_init__(self):
        if not (math.isfinite(self.delta_x) and math.isfinite(self.delta_y)):
            raise InvariantError("cartesian deltas must be finite")


@dataclass(frozen=True)
class MotorSpec:
    """Stepper and transmission parameters shared by all three linear axes."""

    steps_per_rev: int
    pulley_circumference: float  # m of belt travel per rev
    lead_screw_pitch: float  # m of Z travel per rev

    def __post_init__(self):
        if self.steps_per_rev <= 0:
            raise InvariantError("steps_per_rev must be > 0")
        if not self.pulley_circumference > 0:
            raise InvariantError("pulley_circumference must be > 0")
        if not self.lead_screw_pitch > 0:
            raise InvariantError("lead_screw_pitch must be > 0")

    @property
    def step_length(self) -> float:
        """Belt travel per motor step, meters."""
        return self.pulley_circumference / self.steps_per_rev


def belts_to_cartesian(b: BeltDelta) -> CartesianDelta:
    """Forward CoreXY map: dx = (da + db)/2, dy = (da - db)/2."""
    return CartesianDelta(
        delta_x=(b.delta_a + b.delta_b) / 2.0,
        delta_y=(b.delta_a - b.delta_b) / 2.0,
    )


def cartesian_to_belts(c: CartesianDelta) -> BeltDelta:
    """Inverse CoreXY map: da = dx + dy, db = dx - dy."""
    return BeltDelta(delta_a=c.delta_x + c.delta_y, delta_b=c.delta_x - c.delta_y)


def _round_half_away(x: float) -> int:
    """Round to nearest integer, halves away from zero."""
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


def cartesian_to_steps(
    c: CartesianDelta, m: MotorSpec
) -> tuple[int, int, CartesianDelta]:
    """Quantize a carriage move to whole motor steps.

    Returns (steps_a, steps_b, residual) where residual is the Cartesian
    remainder the steps cannot represent; callers carry it into the next
    move so quantization never accumulates drift.
    """
    belts = cartesian_to_belts(c)
    step = m.step_length
    steps_a = _round_half_away(belts.delta_a / step)
    steps_b = _round_half_away(belts.delta_b / step)
    realized = belts_to_cartesian(
        BeltDelta(delta_a=steps_a * step, delta_b=steps_b * step)
    )
    residual = CartesianDelta(
        delta_x=c.delta_x - realized.delta_x,
        delta_y=c.delta_y - realized.delta_y,
    )
    return steps_a, steps_b, residual


def z_to_turns(depth: float, m: MotorSpec) -> float:
    """Lead-screw revolutions needed to plunge `depth` meters (positive-down)."""
    if depth < 0:
        raise ValueError(f"plunge depth must be >= 0, got {depth}")
    return depth / m.lead_screw_pitch
