"""Command-line interface: offline analysis, planning, sizing, simulation,
and the telemetry service.

All commands exit nonzero with a one-line message on validation errors.
"""

import argparse
import sys
import tempfile

from .config import ConfigError, default_config, load_config
from .controller import parse_hhmm
from .images import GrayImage, ImageFormatError, read_image
from .loop import ClosedLoopRun
from .planner import (
    PixelToBinMap,
    PlanningError,
    export_waypoints,
    min_speed,
    motor_feasibility,
    path_length,
    plan_raster,
    plan_spiral,
    plan_targeted,
    stokes_drag,
)
from .simulator import Scenario, load_scenario
from .telemetry import serve
from .vision import (
    Histogram256,
    VisionError,
    connected_components,
    filter_components,
    mix_report,
    mixed_mask,
    otsu_threshold,
    segment,
)


def _load_config(path: str | None):
    return load_config(path) if path else default_config()


def _read_gray(path: str) -> GrayImage:
    image = read_image(path)
    if not isinstance(image, GrayImage):
        raise ImageFormatError(f"{path}: expected an 8-bit graymap (P5)")
    return image


def cmd_plan(args) -> int:
    cfg = _load_config(args.config)
    pitch = args.pitch if args.pitch is not None else cfg.planner.raster_pitch
    common = dict(
        plunge_depth=cfg.spindle.plunge_depth, spin_rate=cfg.spindle.spin_rate
    )
    if args.mode == "raster":
        path = plan_raster(cfg.geometry, pitch, **common)
    elif args.mode == "spiral":
        g = cfg.geometry
        center = (g.x_len / 2.0, g.y_len / 2.0)
        path = plan_spiral(center, min(g.working_x, g.working_y) / 2.0, 3, g, **common)
    else:
        if not args.image:
            raise PlanningError("targeted mode needs --image with a thermal frame")
        gray = _read_gray(args.image)
        threshold = otsu_threshold(Histogram256.of_image(gray))
        _, clusters = connected_components(segment(gray, threshold))
        clusters = filter_components(clusters, cfg.vision.min_component_area)
        mapping = PixelToBinMap.full_bin(cfg.geometry, gray.width, gray.height)
        path = plan_targeted(clusters, cfg.geometry, mapping, **common)
    length = path_length(path)
    budget = cfg.planner.time_budget_s
    print(f"waypoints: {len(path.waypoints)}")
    print(f"length: {length:.3f} m")
    print(f"min speed @{budget:.0f}s: {min_speed(length, budget):.4g} m/s")
    if args.out:
        export_waypoints(path, args.out)
        print(f"waypoints written to {args.out}")
    return 0


def cmd_size(args) -> int:
    cfg = _load_config(args.config)
    drag = stokes_drag(cfg.substrate, cfg.spindle, args.speed)
    report = motor_feasibility(
        drag, cfg.planner.holding_torque, cfg.planner.safety_factor
    )
    print(
        f"per-finger {drag.per_finger_force:.3f} N, "
        f"total {drag.total_force:.3f} N"
    )
    print(
        f"required torque {report.required_torque:.4f} N.m, "
        f"allowed {report.allowed_torque:.4f} N.m "
        f"(holding {report.holding_torque:.3f} N.m x safety {report.safety_factor:.2f})"
    )
    print(f"feasibility: {'PASS' if report.passed else 'FAIL'}")
    return 0


def cmd_analyze(args) -> int:
    before = _read_gray(args.before)
    after = _read_gray(args.after)
    changed = mixed_mask(before, after, args.delta)
    mixed = int(changed.sum())
    unmixed = changed.size - mixed
    baseline_mixed = None
    if args.baseline:
        baseline = _read_gray(args.baseline)
        baseline_mixed = int(mixed_mask(before, baseline, args.delta).sum())
    report = mix_report(mixed, unmixed, baseline_mixed)
    print(f"mixed pixels: {report.mixed_pixels}")
    print(f"unmixed pixels: {report.unmixed_pixels}")
    print(f"coverage: {report.coverage_fraction:.3f}")
    if report.efficacy_ratio is not None:
        print(f"efficacy vs baseline: {report.efficacy_ratio:.3f}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    scenario = load_scenario(args.scenario) if args.scenario else Scenario()
    days = args.days if args.days is not None else scenario.days
    run = ClosedLoopRun(cfg, scenario, out_dir=args.out, tick_s=args.tick)
    run.run_days(days)
    print(run.summary(), end="")
    print(f"outputs written to {args.out}")
    return 0


def cmd_serve(args) -> int:
    cfg = _load_config(args.config)
    scenario = load_scenario(args.scenario) if args.scenario else Scenario()
    out_dir = args.out or tempfile.mkdtemp(prefix="smartlid-serve-")
    run = ClosedLoopRun(cfg, scenario, out_dir=out_dir)
    server = serve(run, host=args.host, port=args.port, period_s=args.period)
    host, port = server.address
    print(f"telemetry service on http://{host}:{port} (logs in {out_dir})")
    print("Ctrl-C to stop")
    try:
        while True:
            server._thread.join(1.0)
    except KeyboardInterrupt:
        print("stopping")
        server.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smartlid",
        description="Smart-lid planning, analysis, simulation, and telemetry.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="generate an aeration path")
    p.add_argument("--config", help="config file (default: shipped config)")
    p.add_argument("--mode", choices=("raster", "spiral", "targeted"), default="raster")
    p.add_argument("--pitch", type=float, help="raster pitch override, meters")
    p.add_argument("--image", help="thermal P5 frame for targeted mode")
    p.add_argument("--out", help="waypoint file to write ('x y' per line)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("size", help="Stokes-drag actuator sizing")
    p.add_argument("--config", help="config file (default: shipped config)")
    p.add_argument("--speed", type=float, required=True, help="travel speed, m/s")
    p.set_defaults(func=cmd_size)

    p = sub.add_parser("analyze", help="mixing report from before/after frames")
    p.add_argument("--before", required=True)
    p.add_argument("--after", required=True)
    p.add_argument("--baseline", help="post-aeration frame of the manual baseline")
    p.add_argument("--delta", type=int, default=20, help="mixed-pixel threshold")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="run the closed loop headless")
    p.add_argument("--config", help="config file (default: shipped config)")
    p.add_argument("--scenario", help="scenario file (default: built-in scenario)")
    p.add_argument("--days", type=float, help="override scenario days")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tick", type=float, default=60.0, help="sim seconds per tick")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="run the loop plus the telemetry service")
    p.add_argument("--config", help="config file (default: shipped config)")
    p.add_argument("--scenario", help="scenario file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8177)
    p.add_argument("--period", type=float, default=1.0,
                   help="wall seconds per simulated tick")
    p.add_argument("--out", help="output directory (default: temp dir)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PlanningError, VisionError, ImageFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
