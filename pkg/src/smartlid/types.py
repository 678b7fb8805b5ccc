"""Shared domain types for the smart-lid system.

All quantities are SI internally: meters, seconds, Pa*s. Unit conversion
happens only at the config boundary (see config.py).
"""

from dataclasses import dataclass


class InvariantError(ValueError):
    """A domain type was constructed with values violating its invariants."""


@dataclass(frozen=True)
class BinGeometry:
    """Interior workspace of a rearing bin, viewed from above.

    The margin is a keep-out border from the walls; all planned motion stays
    inside [margin, x_len - margin] x [margin, y_len - margin].
    """

    x_len: float
    y_len: float
    z_depth: float
    margin: float

    def __post_init__(self):
        for name in ("x_len", "y_len", "z_depth", "margin"):
            if not getattr(self, name) > 0:
                raise InvariantError(f"{name} must be > 0")
        if not self.margin < min(self.x_len, self.y_len) / 2:
            raise InvariantError("margin must be < min(x_len, y_len)/2")

    @property
    def working_x(self) -> float:
        return self.x_len - 2 * self.margin

    @property
    def working_y(self) -> float:
        return self.y_len - 2 * self.margin


@dataclass(frozen=True)
class SpindleSpec:
    """Multi-finger tilling spindle parameters.

    finger_offsets are radial distances of each finger from the spindle axis,
    in meters; finger_radius is the drag-sphere radius of one finger.
    """

    finger_count: int
    finger_radius: float
    finger_offsets: tuple[float, ...]
    spin_rate: float
    plunge_depth: float

    def __post_init__(self):
        if self.finger_count < 1:
            raise InvariantError("finger_count must be >= 1")
        if not self.finger_radius > 0:
            raise InvariantError("finger_radius must be > 0")
        object.__setattr__(self, "finger_offsets", tuple(self.finger_offsets))
        if len(self.finger_offsets) != self.finger_count:
            raise InvariantError(
                f"finger_offsets has {len(self.finger_offsets)} entries, "
                f"expected finger_count={self.finger_count}"
            )
        if any(r < 0 for r in self.finger_offsets):
            raise InvariantError("finger_offsets must be >= 0")
        if not self.spin_rate > 0:
            raise InvariantError("spin_rate must be > 0")
        if not self.plunge_depth > 0:
            raise InvariantError("plunge_depth must be > 0")

    @property
    def sweep_radius(self) -> float:
        """Radius of the disc swept by the spinning fingers."""
        return self.finger_radius + max(self.finger_offsets)

    def validate_against(self, geometry: BinGeometry) -> None:
        if self.plunge_depth > geometry.z_depth:
            raise InvariantError(
                f"plunge_depth {self.plunge_depth} m exceeds bin depth "
                f"{geometry.z_depth} m"
            )


@dataclass(frozen=True)
class SubstrateRheology:
    """Bulk rheology of the larvae-diet substrate."""

    dynamic_viscosity: float  # Pa*s

    def __post_init__(self):
        if not self.dynamic_viscosity > 0:
            raise InvariantError("dynamic_viscosity must be > 0")


@dataclass(frozen=True)
class SensorFrame:
    """One time-stamped reading of the environmental sensor array."""

    timestamp: float  # UTC seconds
    temperature: float  # degrees C
    humidity: float  # %RH
    moisture: float  # dimensionless 0..1
    ph: float
    co2: float  # ppm
    no2: float  # ppm

    def __post_init__(self):
        if not 0.0 <= self.moisture <= 1.0:
            raise InvariantError("moisture must be within [0, 1]")
        if not 0.0 <= self.ph <= 14.0:
            raise InvariantError("ph must be within [0, 14]")
