import filecmp

import numpy as np
import pytest

from smartlid.cli import main
from smartlid.images import GrayImage, write_image


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_plan_default_config_numbers(capsys, tmp_path):
    out_file = tmp_path / "wps.txt"
    code, out, _ = run_cli(capsys, "plan", "--mode", "raster", "--out", str(out_file))
    assert code == 0
    assert "length: 1.920 m" in out
    assert "min speed @60s: 0.032 m/s" in out
    lines = out_file.read_text().splitlines()
    assert lines[0] == "0.030000 0.030000"
    assert len(lines) == 8


def test_plan_spiral_mode(capsys):
    code, out, _ = run_cli(capsys, "plan", "--mode", "spiral")
    assert code == 0
    assert "length:" in out


def test_plan_targeted_needs_image(capsys):
    code, _, err = run_cli(capsys, "plan", "--mode", "targeted")
    assert code == 2
    assert "targeted mode needs --image" in err


def test_plan_targeted_with_image(capsys, tmp_path):
    px = np.full((60, 96), 40, dtype=np.uint8)
    px[20:30, 40:60] = 220  # one hot cluster
    frame = tmp_path / "thermal.pgm"
    write_image(GrayImage(px), frame)
    code, out, _ = run_cli(capsys, "plan", "--mode", "targeted", "--image", str(frame))
    assert code == 0
    assert "waypoints:" in out


def test_size_reference_numbers(capsys):
    code, out, _ = run_cli(capsys, "size", "--speed", "0.032")
    assert code == 0
    assert "per-finger 1.131 N, total 9.048 N" in out
    assert "feasibility: PASS" in out


def test_size_slow_speed_passes_easily(capsys):
    code, out, _ = run_cli(capsys, "size", "--speed", "0.0032")
    assert code == 0
    assert "feasibility: PASS" in out


def test_analyze_identical_frames(capsys, tmp_path):
    px = np.random.default_rng(0).integers(0, 256, (20, 30), dtype=np.uint8)
    a = tmp_path / "a.pgm"
    write_image(GrayImage(px), a)
    code, out, _ = run_cli(capsys, "analyze", "--before", str(a), "--after", str(a))
    assert code == 0
    assert "coverage: 0.000" in out


def test_analyze_with_baseline(capsys, tmp_path):
    rng = np.random.default_rng(1)
    before = rng.integers(0, 100, (20, 30), dtype=np.uint8)
    after = before.copy()
    after[:10] += 100  # automated pass mixed the top half
    manual = before.copy()
    manual[:15] += 100  # manual pass mixed more
    paths = {}
    for name, px in (("before", before), ("after", after), ("manual", manual)):
        paths[name] = tmp_path / f"{name}.pgm"
        write_image(GrayImage(px), paths[name])
    code, out, _ = run_cli(
        capsys, "analyze", "--before", str(paths["before"]),
        "--after", str(paths["after"]), "--baseline", str(paths["manual"]),
    )
    assert code == 0
    assert "coverage: 0.500" in out
    assert "efficacy vs baseline: 0.667" in out


def test_analyze_missing_file(capsys, tmp_path):
    code, _, err = run_cli(
        capsys, "analyze", "--before", str(tmp_path / "x.pgm"),
        "--after", str(tmp_path / "y.pgm"),
    )
    assert code == 2
    assert "error:" in err


def test_simulate_writes_outputs(capsys, tmp_path):
    out_dir = tmp_path / "run"
    scenario = tmp_path / "s.cfg"
    scenario.write_text("seed = 3\ndays = 0.5\nclusters = 4\n")
    code, out, _ = run_cli(
        capsys, "simulate", "--scenario", str(scenario),
        "--out", str(out_dir), "--tick", "300",
    )
    assert code == 0
    assert "start aerations: 1" in out
    for name in ("sensors.csv", "events.txt", "growth.csv", "report.txt"):
        assert (out_dir / name).exists()
    events = (out_dir / "events.txt").read_text()
    assert "START_AERATION" in events
    assert "PHASE MIXING" in events


def test_simulate_is_deterministic(capsys, tmp_path):
    scenario = tmp_path / "s.cfg"
    scenario.write_text("seed = 11\ndays = 0.5\n")
    dirs = []
    for name in ("r1", "r2"):
        out_dir = tmp_path / name
        code, _, _ = run_cli(
            capsys, "simulate", "--scenario", str(scenario),
            "--out", str(out_dir), "--tick", "300",
        )
        assert code == 0
        dirs.append(out_dir)
    for name in ("sensors.csv", "events.txt", "growth.csv", "report.txt"):
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes(), name
    comp = filecmp.dircmp(dirs[0] / "frames", dirs[1] / "frames")
    assert not comp.diff_files and not comp.left_only and not comp.right_only


def test_bad_config_path_fails_cleanly(capsys, tmp_path):
    code, _, err = run_cli(
        capsys, "plan", "--config", str(tmp_path / "missing.cfg")
    )
    assert code == 2
    assert "not found" in err
