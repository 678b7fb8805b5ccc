"""Closed-loop run: substrate simulator + controller + vision, no hardware.

Drives the controller with a simulated clock, applies the spindle's mixing
effect to the substrate whenever the MIXING phase completes, renders
thermal frames through the full perception pipeline, and writes logs,
frames, and an event trace. Fully deterministic for a given config,
scenario, and start epoch.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from . import simulator, vision
from .config import Config
from .controller import Controller, Mode, Phase, SensorLog
from .images import ColorImage, GrayImage, write_image
from .planner import (
    PixelToBinMap,
    PlanningError,
    ToolPath,
    plan_raster,
    plan_spiral,
    plan_targeted,
)
from .simulator import Scenario, VirtualGantry
from .types import SensorFrame

SIM_EPOCH = 1767225600.0  # 2026-01-01T00:00:00Z; scenario day 0 starts here
DEFAULT_TICK_S = 60.0


@dataclass
class AerationRecord:
    t: float
    dispersal_before: float
    dispersal_after: float
    coverage: float


@dataclass
class RunReport:
    start_aerations: int = 0
    aerations: list[AerationRecord] = field(default_factory=list)
    growth_series: list[tuple[float, int]] = field(default_factory=list)
    final_dispersal: float = 0.0
    faults: int = 0


class ClosedLoopRun:
    """One simulated rearing run; construct, then step() or run_days()."""

    def __init__(
        self,
        config: Config,
        scenario: Scenario,
        out_dir: str | os.PathLike | None = None,
        tick_s: float = DEFAULT_TICK_S,
        start_epoch: float = SIM_EPOCH,
    ):
        self.config = config
        self.scenario = scenario
        self.tick_s = tick_s
        self.now = start_epoch
        self.rng = np.random.default_rng(scenario.seed)
        self.biology = scenario.biology()
        self.substrate = simulator.new_substrate(
            config.geometry,
            config.sim.grid_resolution,
            scenario.initial_mass,
            scenario.clusters,
            self.rng,
        )
        self.gantry = VirtualGantry(
            config.geometry.x_len, config.geometry.y_len, config.geometry.z_depth
        )
        self.controller = Controller(
            self.gantry,
            config.motor,
            self._plan,
            schedule=config.schedule.daily_time,
            sample_interval_s=config.schedule.sample_interval_s,
            endstop_timeout_s=config.schedule.endstop_timeout_s,
        )
        self.report = RunReport()
        self.latest_frame: SensorFrame | None = None
        self.latest_thermal: GrayImage | None = None
        self.latest_overlay: ColorImage | None = None
        self.latest_growth_proxy = 0
        self.latest_components = None
        self._last_vision: float | None = None
        self._events: list[str] = []
        self.out_dir = os.fspath(out_dir) if out_dir is not None else None
        self.log: SensorLog | None = None
        if self.out_dir is not None:
            os.makedirs(self.out_dir, exist_ok=True)
            os.makedirs(os.path.join(self.out_dir, "frames"), exist_ok=True)
            self.log = SensorLog(os.path.join(self.out_dir, "sensors.csv"))

    # -- planning ----------------------------------------------------------------

    def _plan(self, path_mode: str) -> ToolPath:
        cfg = self.config
        path = None
        common = dict(
            plunge_depth=cfg.spindle.plunge_depth,
            spin_rate=cfg.spindle.spin_rate,
        )
        if path_mode == "spiral":
            g = cfg.geometry
            center = (g.x_len / 2.0, g.y_len / 2.0)
            radius = min(g.working_x, g.working_y) / 2.0
            path = plan_spiral(center, radius, 3, g, **common)
        elif path_mode == "targeted" and self.latest_components is not None:
            try:
                mapping = PixelToBinMap.full_bin(
                    cfg.geometry,
                    self.latest_thermal.width,
                    self.latest_thermal.height,
                )
                path = plan_targeted(
                    self.latest_components, cfg.geometry, mapping, **common
                )
            except PlanningError:
                path = None
        if path is None:  # raster is both the default and the fallback
            path = plan_raster(cfg.geometry, cfg.planner.raster_pitch, **common)
        return path

    # -- stepping ----------------------------------------------------------------

    def step(self) -> None:
        """Advance one tick: biology, sensors, controller, spindle effects."""
        self.now += self.tick_s
        self.substrate = simulator.step_biology(
            self.substrate, self.tick_s / 3600.0, self.biology, self.rng
        )
        frame = simulator.sample_sensors(
            self.substrate, self.now, self.scenario.seed, self.config.sim.ambient_c
        )
        self.latest_frame = frame
        phase_before = self.controller.phase
        mode_before = self.controller.mode
        actions = self.controller.tick(self.now, frame)
        for action in actions:
            if action[0] == "START_AERATION":
                self.report.start_aerations += 1
                self._event("START_AERATION")
            elif action[0] == "LOG_FRAME" and self.log is not None:
                self.log.append(action[1], self.controller.mode.value)
        if phase_before == Phase.MIXING and self.controller.phase != Phase.MIXING:
            self._apply_spindle_effect()
        if self.controller.mode == Mode.FAULT and mode_before != Mode.FAULT:
            self.report.faults += 1
        if (
            self._last_vision is None
            or self.now - self._last_vision >= self.config.schedule.vision_interval_s
        ):
            self._last_vision = self.now
            self._run_vision()

    def run_days(self, days: float) -> RunReport:
        ticks = int(round(days * 86400.0 / self.tick_s))
        for _ in range(ticks):
            self.step()
        self.report.final_dispersal = simulator.dispersal_index(self.substrate)
        if self.out_dir is not None:
            self._write_outputs()
        return self.report

    # -- effects -------------------------------------------------------------------

    def _apply_spindle_effect(self) -> None:
        path = self.controller.current_path
        streamed = self.controller.segments_streamed
        if path is None or streamed < 2:
            return
        traversed = ToolPath(
            path.waypoints[:streamed],
            path.plunge_depth,
            path.travel_speed,
            path.spindle_spin_rate,
        )
        before = simulator.dispersal_index(self.substrate)
        mask = simulator.swept_mask(self.substrate, traversed, self.config.spindle)
        coverage = float(mask.mean())
        if self.out_dir is not None:
            self._write_frame_pair("before")
        self.substrate = simulator.apply_spindle(
            self.substrate, traversed, self.config.spindle
        )
        after = simulator.dispersal_index(self.substrate)
        self.report.aerations.append(AerationRecord(self.now, before, after, coverage))
        self._event(f"APPLY_SPINDLE coverage={coverage:.4f} "
                    f"dispersal={before:.4f}->{after:.4f}")
        if self.out_dir is not None:
            self._write_frame_pair("after")

    def _run_vision(self) -> None:
        raw = simulator.render_thermal(
            self.substrate,
            noise_seed=self.scenario.seed * 1_000_003 + int(self.now),
            ambient_c=self.config.sim.ambient_c,
        )
        gray = vision.normalize_thermal(
            raw, self.config.vision.window_low_c, self.config.vision.window_high_c
        )
        self.latest_thermal = gray
        try:
            threshold = vision.otsu_threshold(vision.Histogram256.of_image(gray))
            mask = vision.segment(gray, threshold)
        except vision.VisionError:
            mask = np.zeros(gray.pixels.shape, dtype=bool)
        _, components = vision.connected_components(mask)
        components = vision.filter_components(
            components, self.config.vision.min_component_area
        )
        self.latest_components = components
        self.latest_growth_proxy = vision.growth_proxy(components)
        contours = vision.extract_contours(mask)
        heat = vision.apply_inferno(gray)
        self.latest_overlay = vision.overlay_contours(heat, contours)
        self.report.growth_series.append((self.now, self.latest_growth_proxy))

    # -- outputs ---------------------------------------------------------------------

    def _event(self, text: str) -> None:
        self._events.append(f"{self.now:.0f} {text}")

    def _write_frame_pair(self, tag: str) -> None:
        self._run_vision()
        day = int((self.now - SIM_EPOCH) // 86400)
        base = os.path.join(self.out_dir, "frames", f"day{day:03d}_{tag}")
        write_image(self.latest_thermal, base + ".pgm")
        write_image(self.latest_overlay, base + ".ppm")

    def _write_outputs(self) -> None:
        trace_path = os.path.join(self.out_dir, "events.txt")
        with open(trace_path, "w", encoding="utf-8") as fh:
            for entry in self.controller.trace:
                t, name, *args = entry
                suffix = (" " + " ".join(str(a) for a in args)) if args else ""
                fh.write(f"{t:.0f} {name}{suffix}\n")
            for line in self._events:
                fh.write(line + "\n")
        growth_path = os.path.join(self.out_dir, "growth.csv")
        with open(growth_path, "w", encoding="utf-8") as fh:
            fh.write("timestamp,growth_proxy\n")
            for t, proxy in self.report.growth_series:
                fh.write(f"{t:.0f},{proxy}\n")
        report_path = os.path.join(self.out_dir, "report.txt")
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write(self.summary())

    def summary(self) -> str:
        lines = [
            f"simulated days: {self.scenario.days}",
            f"start aerations: {self.report.start_aerations}",
            f"faults: {self.report.faults}",
            f"final dispersal index: {self.report.final_dispersal:.4f}",
        ]
        for rec in self.report.aerations:
            lines.append(
                f"aeration at t={rec.t:.0f}: coverage {rec.coverage:.4f}, "
                f"dispersal {rec.dispersal_before:.4f} -> {rec.dispersal_after:.4f}"
            )
        return "\n".join(lines) + "\n"
