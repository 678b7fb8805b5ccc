import math

import numpy as np
import pytest

from smartlid.config import ConfigError
from smartlid.planner import ToolPath, plan_raster
from smartlid.simulator import (
    BiologyParams,
    GantryError,
    Scenario,
    SimulationError,
    SubstrateState,
    VirtualGantry,
    apply_spindle,
    dispersal_index,
    gantry_execute,
    load_scenario,
    new_substrate,
    render_thermal,
    sample_sensors,
    step_biology,
    swept_mask,
)
from smartlid.types import BinGeometry, SpindleSpec
from smartlid.vision import raw_to_celsius

GEOM = BinGeometry(x_len=0.48, y_len=0.30, z_depth=0.12, margin=0.03)
SPINDLE = SpindleSpec(
    finger_count=8,
    finger_radius=0.0075,
    finger_offsets=(0.004, 0.006, 0.007, 0.008, 0.009, 0.010, 0.013, 0.027),
    spin_rate=1.0,
    plunge_depth=0.08,
)


def seeded_state(rng=None, mass=100.0, clusters=5):
    rng = rng or np.random.default_rng(7)
    return new_substrate(GEOM, 0.005, mass, clusters, rng)


def uniform_state(value=2.0, shape=(6, 8)):
    density = np.full(shape, value)
    return SubstrateState(density, np.full(shape, 0.7), 0.005, float(density.sum()))


# -- biology ------------------------------------------------------------------


def test_growth_matches_closed_form_over_12_days():
    state = seeded_state()
    initial = state.total_mass
    for _ in range(12 * 24):  # hourly steps
        state = step_biology(state, 1.0)
    assert state.total_mass == pytest.approx(10.0 * initial, rel=0.01)
    assert state.density.sum() == pytest.approx(state.total_mass, rel=1e-9)


def test_tiny_dt_changes_nothing_much():
    state = seeded_state()
    stepped = step_biology(state, 1e-7)
    assert stepped.total_mass == pytest.approx(state.total_mass, rel=1e-9)
    with pytest.raises(SimulationError):
        step_biology(state, 0.0)


def test_uniform_field_stays_uniform_without_noise():
    state = uniform_state()
    stepped = step_biology(state, 5.0, BiologyParams(noise_amp=0.0))
    expected = 2.0 * math.exp(BiologyParams().growth_rate_per_h * 5.0)
    assert stepped.density == pytest.approx(np.full((6, 8), expected))


def test_uniform_field_uniform_in_expectation_with_seeded_noise():
    state = uniform_state()
    rng = np.random.default_rng(3)
    stepped = step_biology(state, 1.0, BiologyParams(), rng)
    assert stepped.density.mean() == pytest.approx(
        2.0 * math.exp(BiologyParams().growth_rate_per_h), rel=1e-9
    )
    spread = stepped.density.max() - stepped.density.min()
    assert 0 < spread < 2.0 * 3 * BiologyParams().noise_amp


def test_clustering_drift_conserves_and_sharpens():
    state = seeded_state()
    before_cv = dispersal_index(state)
    stepped = state
    for _ in range(48):
        stepped = step_biology(
            stepped, 1.0, BiologyParams(growth_rate_per_h=0.0, noise_amp=0.0)
        )
    assert stepped.total_mass == pytest.approx(state.total_mass, rel=1e-9)
    assert dispersal_index(stepped) > before_cv  # rich get richer


# -- spindle mixing -------------------------------------------------------------


def full_coverage_path():
    return plan_raster(GEOM, 0.04, travel_speed=0.032)


def test_apply_spindle_conserves_mass():
    state = seeded_state()
    path = full_coverage_path()
    mixed = apply_spindle(state, path, SPINDLE)
    assert mixed.density.sum() == pytest.approx(state.density.sum(), rel=1e-9)


def test_apply_spindle_reduces_variance_full_coverage():
    state = seeded_state()
    mixed = apply_spindle(state, full_coverage_path(), SPINDLE)
    assert mixed.density.var() < state.density.var()
    again = apply_spindle(mixed, full_coverage_path(), SPINDLE)
    assert again.density.var() < mixed.density.var()


def test_apply_spindle_off_lane_untouched():
    state = seeded_state()
    lane = ToolPath(((0.03, 0.15), (0.45, 0.15)), 0.08, 0.032, 1.0)
    swept = swept_mask(state, lane, SPINDLE)
    mixed = apply_spindle(state, lane, SPINDLE)
    assert (mixed.density[~swept] == state.density[~swept]).all()
    assert not (mixed.density[swept] == state.density[swept]).all()


def test_apply_spindle_toy_grid_hand_values():
    """Single-row 5-cell grid, middle 3 cells swept, k = 1, weight 9.

    Hand evaluation of the exchange rule with d = [0, 0, 6, 0, 0]:
    cell1: 0 + (6 - 2*0)/9 = 2/3; cell2: 6 + (6 - 3*6)/9 = 14/3;
    cell3 mirrors cell1; off-lane cells stay exactly 0.
    """
    density = np.array([[0.0, 0.0, 6.0, 0.0, 0.0]])
    state = SubstrateState(density, np.full((1, 5), 0.5), 0.005, 6.0)
    spec = SpindleSpec(1, 0.002, (0.002,), 1.0, 0.08)  # sweep radius 4 mm -> k = 1
    path = ToolPath(((0.0075, 0.0025), (0.0175, 0.0025)), 0.08, 0.032, 1.0)
    swept = swept_mask(state, path, spec)
    assert swept.tolist() == [[False, True, True, True, False]]
    mixed = apply_spindle(state, path, spec)
    assert mixed.density[0] == pytest.approx([0.0, 2 / 3, 14 / 3, 2 / 3, 0.0])


def test_default_raster_coverage_at_least_84_percent(cfg):
    state = seeded_state()
    path = plan_raster(cfg.geometry, cfg.planner.raster_pitch)
    coverage = swept_mask(state, path, cfg.spindle).mean()
    assert coverage >= 0.84


# -- thermal rendering ------------------------------------------------------------


def test_render_thermal_zero_density_is_ambient():
    state = SubstrateState(
        np.zeros((10, 12)), np.full((10, 12), 0.5), 0.005, 0.0
    )
    raw = render_thermal(state, noise_seed=5, ambient_c=25.0)
    temps = raw_to_celsius(raw)
    assert np.abs(temps - 25.0).max() <= 0.1 + 0.01


def test_render_thermal_hot_cluster_is_local_max():
    density = np.zeros((21, 21))
    density[10, 10] = 50.0
    state = SubstrateState(density, np.full((21, 21), 0.5), 0.005, 50.0)
    raw = render_thermal(state, noise_seed=5)
    assert np.unravel_index(raw.argmax(), raw.shape) == (10, 10)


def test_render_thermal_deterministic_per_seed():
    state = seeded_state()
    assert (render_thermal(state, 9) == render_thermal(state, 9)).all()
    assert (render_thermal(state, 9) != render_thermal(state, 10)).any()


# -- sensors ----------------------------------------------------------------------


def test_sensors_baseline_at_zero_mass():
    state = SubstrateState(np.zeros((5, 5)), np.zeros((5, 5)), 0.005, 0.0)
    frame = sample_sensors(state, 0.0, seed=1, ambient_c=25.0)
    assert frame.temperature == pytest.approx(25.0, abs=0.06)
    assert frame.co2 == pytest.approx(420.0, abs=2.5)
    assert frame.moisture == pytest.approx(0.0, abs=0.01)


def test_sensors_co2_strictly_rises_with_mass():
    small = uniform_state(1.0)
    big = uniform_state(2.0)
    f_small = sample_sensors(small, 600.0, seed=4)
    f_big = sample_sensors(big, 600.0, seed=4)
    assert f_big.co2 > f_small.co2


def test_sensors_deterministic():
    state = seeded_state()
    assert sample_sensors(state, 300.0, 11) == sample_sensors(state, 300.0, 11)
    assert sample_sensors(state, 300.0, 11) != sample_sensors(state, 360.0, 11)


def test_sensor_ph_stays_in_band():
    state = seeded_state()
    for day in range(0, 15):
        frame = sample_sensors(state, day * 86400.0, seed=2)
        assert 6.0 <= frame.ph <= 9.0


# -- gantry -------------------------------------------------------------------------


def test_gantry_execute_event_order():
    gv = VirtualGantry(0.48, 0.30, 0.12)
    path = plan_raster(GEOM, 0.08)
    events = gantry_execute(gv, path)
    names = [e[0] for e in events]
    assert names[0] == "PLUNGE"
    assert names[-1] == "HOME"
    assert names[-2] == "END_STOP"
    assert names.count("MOVE") == len(path.waypoints) - 1
    lanes = 4
    assert names.count("MOVE") == 2 * lanes - 1
    assert gv.at_home and not gv.spindle_spinning


def test_gantry_execute_requires_home():
    gv = VirtualGantry(0.48, 0.30, 0.12)
    gv.move_to(0.1, 0.1)
    with pytest.raises(GantryError, match="homed"):
        gantry_execute(gv, plan_raster(GEOM, 0.08))


def test_gantry_mechanical_limits():
    gv = VirtualGantry(0.48, 0.30, 0.12)
    with pytest.raises(GantryError, match="limits"):
        gv.move_to(0.5, 0.1)
    with pytest.raises(GantryError, match="Z travel"):
        gv.plunge(0.2)


def test_gantry_end_stops_track_pose():
    gv = VirtualGantry(0.48, 0.30, 0.12)
    assert gv.end_stop_x and gv.end_stop_y and gv.end_stop_z
    gv.move_to(0.1, 0.0)
    assert not gv.end_stop_x and gv.end_stop_y
    gv.fail_end_stop = True
    gv.move_to(0.0, 0.0)
    assert not gv.end_stop_x  # broken switch never reports


# -- dispersal index -------------------------------------------------------------------


def test_dispersal_uniform_is_zero():
    assert dispersal_index(uniform_state()) == pytest.approx(0.0)


def test_dispersal_point_mass_closed_form():
    for ny, nx in ((4, 4), (5, 8)):
        density = np.zeros((ny, nx))
        density[0, 0] = 12.0
        state = SubstrateState(density, np.zeros((ny, nx)), 0.005, 12.0)
        assert dispersal_index(state) == pytest.approx(math.sqrt(ny * nx - 1))


def test_dispersal_zero_mass_errors():
    state = SubstrateState(np.zeros((3, 3)), np.zeros((3, 3)), 0.005, 0.0)
    with pytest.raises(SimulationError):
        dispersal_index(state)


def test_dispersal_decreases_across_full_coverage_aeration():
    state = seeded_state()
    mixed = apply_spindle(state, full_coverage_path(), SPINDLE)
    assert dispersal_index(mixed) < dispersal_index(state)


# -- scenario ---------------------------------------------------------------------------


def test_load_scenario(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text("seed = 9\ndays = 3\ninitial_mass = 50\nclusters = 2\n")
    scenario = load_scenario(path)
    assert scenario == Scenario(seed=9, days=3.0, initial_mass=50.0, clusters=2)


def test_scenario_rejects_unknown_keys(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text("frobnicate = yes\n")
    with pytest.raises(ConfigError, match="unknown scenario key"):
        load_scenario(path)


def test_scenario_validates(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text("days = -1\n")
    with pytest.raises(ConfigError, match="days"):
        load_scenario(path)
