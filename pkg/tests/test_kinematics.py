import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smartlid.kinematics import (
    BeltDelta,
    CartesianDelta,
    MotorSpec,
    belts_to_cartesian,
    cartesian_to_belts,
    cartesian_to_steps,
    z_to_turns,
)

MOTOR = MotorSpec(steps_per_rev=200, pulley_circumference=0.040, lead_screw_pitch=0.008)

finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


def test_forward_map_published_examples():
    # equal belt motion -> diagonal carriage motion, and vice versa
    c = belts_to_cartesian(BeltDelta(2.0, 0.0))
    assert (c.delta_x, c.delta_y) == (1.0, 1.0)
    c = belts_to_cartesian(BeltDelta(1.0, 1.0))
    assert (c.delta_x, c.delta_y) == (1.0, 0.0)
    c = belts_to_cartesian(BeltDelta(0.0, 0.0))
    assert (c.delta_x, c.delta_y) == (0.0, 0.0)


def test_inverse_map_by_substitution():
    b = cartesian_to_belts(CartesianDelta(1.0, 0.0))
    assert (b.delta_a, b.delta_b) == (1.0, 1.0)
    b = cartesian_to_belts(CartesianDelta(0.0, 1.0))
    assert (b.delta_a, b.delta_b) == (1.0, -1.0)


@settings(max_examples=300, deadline=None)
@given(dx=finite, dy=finite)
def test_round_trip_property(dx, dy):
    c = CartesianDelta(dx, dy)
    back = belts_to_cartesian(cartesian_to_belts(c))
    assert abs(back.delta_x - dx) < 1e-12
    assert abs(back.delta_y - dy) < 1e-12


@settings(max_examples=200, deadline=None)
@given(da=finite, db=finite)
def test_round_trip_other_direction(da, db):
    b = BeltDelta(da, db)
    back = cartesian_to_belts(belts_to_cartesian(b))
    assert abs(back.delta_a - da) < 1e-12
    assert abs(back.delta_b - db) < 1e-12


@settings(max_examples=200, deadline=None)
@given(d=st.floats(1e-9, 1.0))
def test_corexy_coupling(d):
    pure_x = cartesian_to_belts(CartesianDelta(d, 0.0))
    assert pure_x.delta_a == pure_x.delta_b
    pure_y = cartesian_to_belts(CartesianDelta(0.0, d))
    assert pure_y.delta_a == -pure_y.delta_b
    # both motors move for any nonzero motion
    assert pure_x.delta_a != 0 and pure_y.delta_a != 0


def test_quantize_full_rev():
    steps_a, steps_b, residual = cartesian_to_steps(
        CartesianDelta(MOTOR.pulley_circumference, 0.0), MOTOR
    )
    assert (steps_a, steps_b) == (200, 200)
    assert abs(residual.delta_x) < 1e-15 and abs(residual.delta_y) < 1e-15


def test_quantize_zero():
    steps_a, steps_b, residual = cartesian_to_steps(CartesianDelta(0.0, 0.0), MOTOR)
    assert (steps_a, steps_b) == (0, 0)
    assert residual == CartesianDelta(0.0, 0.0)


def test_quantize_near_half_step():
    # 0.4999 step-lengths rounds down; 0.5 rounds away from zero
    step = MOTOR.step_length
    steps_a, _, _ = cartesian_to_steps(CartesianDelta(0.4999 * step, 0.0), MOTOR)
    assert steps_a == 0
    steps_a, _, _ = cartesian_to_steps(CartesianDelta(0.5 * step, 0.0), MOTOR)
    assert steps_a == 1
    steps_a, _, _ = cartesian_to_steps(CartesianDelta(-0.5 * step, 0.0), MOTOR)
    assert steps_a == -1


def test_residual_bounded_by_half_step():
    step = MOTOR.step_length
    for frac in (0.1, 0.3, 0.49, 0.51, 0.77, 0.999):
        _, _, residual = cartesian_to_steps(
            CartesianDelta(frac * step, -frac * step), MOTOR
        )
        assert abs(residual.delta_x) <= step / 2 + 1e-15
        assert abs(residual.delta_y) <= step / 2 + 1e-15


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=40))
def test_carried_residual_accumulates_no_drift(moves):
    """Sum of emitted steps plus the final residual equals commanded travel."""
    step = MOTOR.step_length
    carried = CartesianDelta(0.0, 0.0)
    total_cmd_x = total_cmd_y = 0.0
    total_steps_a = total_steps_b = 0
    for dx, dy in moves:
        total_cmd_x += dx
        total_cmd_y += dy
        want = CartesianDelta(dx + carried.delta_x, dy + carried.delta_y)
        sa, sb, carried = cartesian_to_steps(want, MOTOR)
        total_steps_a += sa
        total_steps_b += sb
    realized = belts_to_cartesian(
        BeltDelta(total_steps_a * step, total_steps_b * step)
    )
    assert realized.delta_x + carried.delta_x == pytest.approx(total_cmd_x, abs=1e-9)
    assert realized.delta_y + carried.delta_y == pytest.approx(total_cmd_y, abs=1e-9)


def test_z_to_turns():
    assert z_to_turns(0.008, MOTOR) == pytest.approx(1.0)
    assert z_to_turns(0.0, MOTOR) == 0.0
    assert z_to_turns(0.020, MOTOR) == pytest.approx(2.5)
    with pytest.raises(ValueError, match=">= 0"):
        z_to_turns(-0.001, MOTOR)


def test_motor_spec_invariants():
    with pytest.raises(ValueError):
        MotorSpec(0, 0.04, 0.008)
    with pytest.raises(ValueError):
        MotorSpec(200, 0.0, 0.008)
    with pytest.raises(ValueError):
        BeltDelta(math.inf, 0.0)
