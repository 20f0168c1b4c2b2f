import csv
import io
import json
import math
import re
from dataclasses import replace

import pytest

from nanonav import cli
from nanonav.harness import (SUMMARY_FIELDS, ConfigError, aggregate, best_k_vel,
                             derive_seed, load_config, render_svg, run_scenario, run_svg, summary_csv,
                             sweep, write_run, write_sweep)
from nanonav.perception import DetectionNoise, project_obstacle
from nanonav.geometry import Pose2D
from nanonav.vehicle import DriftModel

CLEAN = dict(noise=DetectionNoise(), drift=DriftModel())


def test_free_flight_length():
    cfg = replace(load_config(None, ["obstacles=[]"]), drift=DriftModel())
    for seed in range(3):
        rep = run_scenario(cfg, seed).report
        assert rep.success
        # the task ends on entering the capture circle of B
        assert 4.0 - cfg.waypoints[1].capture_radius <= rep.path_length_m <= 4.2


def test_free_flight_with_drift_respects_displacement():
    cfg = load_config(None, ["obstacles=[]"])
    for seed in range(3):
        res = run_scenario(cfg, seed)
        task = [r for r in res.trajectory if r[7] != 0 or r[8] != 0]
        end = task[-1]
        assert res.report.success
        assert res.report.path_length_m >= math.hypot(end[1], end[2]) - 1e-9
        assert res.report.path_length_m <= 4.2


def test_control_condition_always_succeeds():
    cfg = replace(load_config(None, ["obstacles=[]"]), **CLEAN)
    times = {run_scenario(cfg, s).report.completion_time_ms for s in range(4)}
    reps = [run_scenario(cfg, s).report for s in range(4)]
    assert all(r.success and r.collisions == 0 for r in reps)
    # only the link schedule differs between seeds
    assert max(times) - min(times) <= 300


def test_protocol_phases_logged():
    res = run_scenario(load_config(), 2)
    drone = [(p["state_before"], p["state_after"]) for p in res.protocol if p["side"] == "drone"]
    states = [a for b, a in drone if a != b]
    assert states == ["hovering", "ready", "stopping", "ground"]
    assert res.t_task_start_ms >= 1000.0
    assert res.telemetry_messages > 0


def test_same_seed_same_bytes(tmp_path):
    cfg = load_config()
    a = write_run(run_scenario(cfg, 11), tmp_path / "a")
    b = write_run(run_scenario(cfg, 11), tmp_path / "b")
    names = sorted(p.name for p in a.iterdir())
    assert names == ["commands.jsonl", "config.json", "detections.jsonl", "frames.csv", "path.svg",
                     "protocol.jsonl", "report.json", "trajectory.csv"]
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_sensing_uses_capture_time_pose():
    cfg = load_config()
    res = run_scenario(cfg, 5)
    dt = cfg.vehicle.sim_dt * 1000
    rows = {r[0]: r for r in res.trajectory}
    cmd_by_frame = {c["frame_index"]: c for c in res.commands}
    checked = 0
    for d in res.detections:
        if d["ground_truth"] is None:
            continue
        k = int(d["t_ms"] // dt)
        row = rows.get(round(k * dt, 3))
        if row is None:
            continue
        box = project_obstacle(cfg.camera, Pose2D(row[1], row[2], row[3]), cfg.obstacles[0])
        assert box.xm == pytest.approx(d["ground_truth"]["xm"], abs=1e-2)
        assert box.xM == pytest.approx(d["ground_truth"]["xM"], abs=1e-2)
        c = cmd_by_frame.get(d["frame_index"])
        if c is not None:
            assert c["t_capture_ms"] == d["t_ms"] <= c["t_ms"]
        checked += 1
    assert checked > 5


def test_zero_latency_ablation_runs():
    res = run_scenario(load_config(None, ["zero_latency=true"]), 1)
    assert all(c["t_capture_ms"] == c["t_ms"] for c in res.commands)


def test_config_errors_name_the_field():
    with pytest.raises(ConfigError, match="repetitions"):
        load_config(None, ["repetitions=0"])
    with pytest.raises(ConfigError, match="waypoints"):
        load_config(None, ["waypoints=[[0,0]]"])
    with pytest.raises(ConfigError, match="planner"):
        load_config(None, ["planner.alpha=3"])
    with pytest.raises(ConfigError, match="unknown"):
        load_config(None, ["nonsense=1"])
    with pytest.raises(ConfigError, match="link"):
        load_config(None, ["link.profile=PNG"])
    with pytest.raises(ConfigError, match="sweep_classes"):
        load_config(None, ['sweep_classes=["pyramid"]'])


def test_config_round_trip_and_profiles(tmp_path):
    cfg = load_config(None, ["planner.k_vel=0.7", "link.profile=JPEG", "vehicle.profile=slow_yaw",
                             "noise.profile=detector_regime"])
    assert cfg.link.format == "JPEG" and cfg.link.encode_ms.mean == 27.0
    assert cfg.vehicle.yaw_time_constant == 0.9
    assert cfg.noise.edge_jitter_sigma == 14.0
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert load_config(str(p)) == cfg


def test_derive_seed_is_stable():
    assert derive_seed(0, 1.5, "short", 0) == derive_seed(0, 1.5, "short", 0)
    assert len({derive_seed(0, k, c, r) for k in (1, 1.5) for c in ("short", "large") for r in range(3)}) == 12


def test_single_cell_sweep_equals_repeated_runs():
    cfg = replace(load_config(), repetitions=3, k_vel_sweep=[1.5])
    res = sweep(cfg, 4, classes=["short"])
    from nanonav.harness import cell_config
    reps = [run_scenario(cell_config(cfg, 1.5, "short"), derive_seed(4, 1.5, "short", r)).report
            for r in range(3)]
    assert res.rows == [aggregate(1.5, "short", reps)]


def test_sweep_order_independent():
    cfg = replace(load_config(), repetitions=2, k_vel_sweep=[1.0, 2.0])
    a = sweep(cfg, 9)
    b = sweep(replace(cfg, k_vel_sweep=[2.0, 1.0], sweep_classes=["large", "short"]), 9)
    key = lambda r: (r["k_vel"], r["class"])
    assert sorted(a.rows, key=key) == sorted(b.rows, key=key)


def test_sweep_parallel_matches_serial():
    cfg = replace(load_config(), repetitions=2, k_vel_sweep=[1.5])
    assert summary_csv(sweep(cfg, 3, jobs=2).rows) == summary_csv(sweep(cfg, 3, jobs=1).rows)


def test_clean_control_sweep():
    cfg = replace(load_config(), repetitions=2, **CLEAN)
    res = sweep(cfg, 0, classes=[None])
    assert all(r["success_pct"] == 100.0 for r in res.rows)
    times = [r["mean_time_ms"] for r in res.rows]
    assert max(times) - min(times) <= 300


def test_ranking_rule():
    rows = [
        {"k_vel": 1.0, "class": "short", "success_pct": 80.0, "mean_time_ms": 7000.0, "mean_length_m": 4.5},
        {"k_vel": 1.5, "class": "short", "success_pct": 80.0, "mean_time_ms": 6500.0, "mean_length_m": 4.6},
        {"k_vel": 2.0, "class": "short", "success_pct": 60.0, "mean_time_ms": 5000.0, "mean_length_m": 4.2},
        {"k_vel": 0.5, "class": "short", "success_pct": 80.0, "mean_time_ms": 6500.0, "mean_length_m": 4.4},
    ]
    assert best_k_vel(rows) == 0.5
    assert best_k_vel(rows[:3]) == 1.5
    assert best_k_vel([]) is None


def test_summary_schema():
    assert summary_csv([]) == ",".join(SUMMARY_FIELDS) + "\n"
    assert set(SUMMARY_FIELDS) == {"k_vel", "class", "success_pct", "mean_time_ms", "mean_length_m",
                                   "collisions"}
    row = aggregate(1.0, "large", [])
    assert row["success_pct"] == 0.0 and math.isnan(row["mean_time_ms"])
    assert summary_csv([row]).splitlines()[1] == "1.000000,large,0.000000,,,0"


def test_svg_structure():
    res = run_scenario(load_config(), 0)
    svg = run_svg(res)
    polys = re.findall(r'<polyline class="path" points="([^"]*)"', svg)
    assert len(polys) == 1
    assert len(polys[0].split()) == len(res.trajectory)
    assert svg.count('class="obstacle"') == 1
    assert svg.count('class="capture"') == 2
    assert f'r="{0.10 * 120:.2f}"' in svg
    empty = render_svg(res.config.waypoints, [], [])
    assert "<polyline" not in empty


def test_sweep_layout(tmp_path):
    cfg = replace(load_config(), repetitions=1, k_vel_sweep=[1.5])
    out = write_sweep(sweep(cfg, 0), tmp_path)
    assert (out / "sweep" / "summary.csv").exists()
    assert (out / "sweep" / "paths.svg").read_text().count("<polyline") == 2
    for cls in ("short", "large"):
        d = out / "runs" / f"k1.5_{cls}" / "0"
        for n in ("trajectory.csv", "commands.jsonl", "frames.csv", "protocol.jsonl", "report.json"):
            assert (d / n).exists()


def test_trajectory_csv_header(tmp_path):
    out = write_run(run_scenario(load_config(), 0), tmp_path)
    rows = list(csv.reader(io.StringIO((out / "trajectory.csv").read_text())))
    assert rows[0][:3] == ["t_ms", "true_x", "true_y"]


# ---------------------------------------------------------------- CLI

def test_cli_run_and_eval(tmp_path, capsys):
    assert cli.main(["run", "--seed", "1", "--out", str(tmp_path / "r")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["seed"] == 1
    assert cli.main(["eval-detections", str(tmp_path / "r" / "detections.jsonl"),
                     "--run-report", str(tmp_path / "r" / "report.json")]) == 0
    ev = json.loads(capsys.readouterr().out)
    assert {"coco_map", "ap50", "window_map_mean", "window_map_series", "path_length_m"} <= set(ev)
    assert cli.main(["plot", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "paths.svg").exists()


def test_cli_sweep(tmp_path, capsys):
    args = ["sweep", "--seed", "2", "--set", "repetitions=1", "--set", "k_vel_sweep=[1.5]",
            "--out", str(tmp_path), "--summary-only"]
    assert cli.main(args) == 0
    out = capsys.readouterr().out
    assert out == (tmp_path / "sweep" / "summary.csv").read_text()
    assert not (tmp_path / "runs").exists()


def test_cli_requires_seed():
    with pytest.raises(SystemExit):
        cli.main(["run"])


def test_cli_config_error(capsys):
    assert cli.main(["run", "--seed", "0", "--set", "repetitions=0"]) == 2
    assert "repetitions" in capsys.readouterr().err
