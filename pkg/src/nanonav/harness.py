"""Closed-loop scenarios, parameter sweeps and artifact export.

One run couples the link schedule, the synthetic detector, the planner, the
vehicle model and both protocol state machines on a 10 ms virtual clock.
Detections are computed from the true pose at frame capture time and reach
the planner at the frame's command time.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import heapq
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import metrics
from .geometry import Pose2D, Waypoint
from .link import LinkConfig, default_link_config, frames_to_csv, load_calibration, schedule_frames
from .metrics import RunReport
from .perception import CameraModel, DetectionNoise, Detector, ObstacleClass, ObstacleSpec
from .planner import Command, PlannerConfig, PlannerEvent, PlannerState, planning_step
from .protocol import (DetectionData, DroneState, FlightStatus, MasterState, MessageKind,
                       PoseTelemetry, SyncState, TaskEvent, drone_step, master_step)
from .vehicle import DriftModel, VehicleParams, VehicleState, check_collision, step_kinematics


class ConfigError(ValueError):
    pass


def _profile(section: str, name: str) -> dict:
    table = load_calibration()[section]
    if name not in table:
        raise ConfigError(f"{section}: no calibrated profile {name!r} (have {sorted(table)})")
    return dict(table[name])


def noise_profile(name: str = "default") -> DetectionNoise:
    d = _profile("detection_noise", name)
    return DetectionNoise(d["edge_jitter_sigma"], d["miss_rate"], d["false_positive_rate"],
                          tuple(d["score_range"]))


def vehicle_profile(name: str = "default") -> VehicleParams:
    return VehicleParams(**_profile("vehicle", name))


def default_noise() -> DetectionNoise:
    return noise_profile("default")


def _default_vehicle() -> VehicleParams:
    return vehicle_profile("default")


@dataclass
class ScenarioConfig:
    waypoints: list = field(default_factory=lambda: [Waypoint(0.0, 0.0), Waypoint(4.0, 0.0)])
    obstacles: list = field(default_factory=lambda: [ObstacleSpec.of_class("short", 2.0, 0.0)])
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    link: LinkConfig = field(default_factory=default_link_config)
    vehicle: VehicleParams = field(default_factory=_default_vehicle)
    drift: DriftModel = field(default_factory=lambda: DriftModel(5e-4, 0.01))
    camera: CameraModel = field(default_factory=CameraModel)
    noise: DetectionNoise = field(default_factory=default_noise)
    detection_threshold: float = 0.5
    seed: int = 0
    repetitions: int = 5
    k_vel_sweep: list = field(default_factory=lambda: [0.5, 0.7, 1.0, 1.5, 2.0])
    sweep_classes: list = field(default_factory=lambda: ["short", "large"])
    obstacle_distance: float = 2.0
    obstacle_offset_y: float = 0.0
    zero_latency: bool = False
    takeoff_time_s: float = 1.0
    landing_time_s: float = 1.0
    max_task_time_s: float = 30.0

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ConfigError("waypoints: need at least 2 waypoints")
        if self.repetitions < 1:
            raise ConfigError("repetitions: must be >= 1")
        if self.max_task_time_s <= 0:
            raise ConfigError("max_task_time_s: must be positive")
        for c in self.sweep_classes:
            try:
                ObstacleClass(c)
            except ValueError:
                raise ConfigError(f"sweep_classes: unknown obstacle class {c!r}") from None

    # ------------------------------------------------------------ (de)serialization
    def to_dict(self) -> dict:
        return {
            "waypoints": [asdict(w) for w in self.waypoints],
            "obstacles": [{"class": o.cls.value, "center_x": o.center_x, "center_y": o.center_y,
                           "footprint_w": o.footprint_w, "footprint_d": o.footprint_d,
                           "height": o.height} for o in self.obstacles],
            "planner": asdict(self.planner),
            "link": self.link.to_dict(),
            "vehicle": asdict(self.vehicle),
            "drift": asdict(self.drift),
            "camera": asdict(self.camera),
            "noise": {**asdict(self.noise), "score_range": list(self.noise.score_range)},
            **{f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)
               if f.name not in _NESTED},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        base = cls()
        kw = {}
        for key, value in d.items():
            try:
                kw[key] = _parse_field(key, value, getattr(base, key))
            except ConfigError:
                raise
            except (TypeError, ValueError, KeyError) as e:
                raise ConfigError(f"{key}: {e}") from None
        return cls(**kw)


_NESTED = {"waypoints", "obstacles", "planner", "link", "vehicle", "drift", "camera", "noise"}


def _merge(base_obj, value: dict, typ):
    unknown = set(value) - {f.name for f in fields(typ)}
    if unknown:
        raise ValueError(f"unknown fields {sorted(unknown)}")
    return typ(**{**asdict(base_obj), **value})


def _parse_field(key: str, value, default):
    # a "profile" entry swaps the base of a section for a calibrated one
    if key in ("link", "vehicle", "noise") and isinstance(value, dict) and "profile" in value:
        value = dict(value)
        name = value.pop("profile")
        if key == "link":
            try:
                default = default_link_config(name)
            except ValueError as e:
                raise ConfigError(f"link: {e}") from None
        elif key == "vehicle":
            default = vehicle_profile(name)
        else:
            default = noise_profile(name)
    if key == "waypoints":
        return [Waypoint(**w) if isinstance(w, dict) else Waypoint(*w) for w in value]
    if key == "obstacles":
        out = []
        for o in value:
            o = dict(o)
            if set(o) <= {"class", "center_x", "center_y"}:
                out.append(ObstacleSpec.of_class(o["class"], o["center_x"], o.get("center_y", 0.0)))
            else:
                out.append(ObstacleSpec(ObstacleClass(o.pop("class")), **o))
        return out
    if key == "link":
        return LinkConfig.from_dict({**default.to_dict(), **value})
    if key == "noise":
        v = dict(value)
        if "score_range" in v:
            v["score_range"] = tuple(v["score_range"])
        return _merge(default, v, DetectionNoise)
    if key in ("planner", "vehicle", "drift", "camera"):
        return _merge(default, value, type(default))
    return value


def apply_overrides(d: dict, overrides: Sequence[str]) -> dict:
    """Apply ``key.sub=value`` strings to a config dict; values are parsed as JSON when possible."""
    d = copy.deepcopy(d)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = d
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"{key}: {p} is not a section")
        node[parts[-1]] = value
    return d


def load_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> ScenarioConfig:
    d = {}
    if path:
        with open(path) as fh:
            d = json.load(fh)
    return ScenarioConfig.from_dict(apply_overrides(d, overrides))


def derive_seed(seed: int, k_vel: float, obstacle_class: str, repetition: int) -> int:
    key = f"{seed}|{k_vel:.6g}|{obstacle_class}|{repetition}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


# ---------------------------------------------------------------- closed loop

@dataclass
class RunResult:
    report: RunReport
    trajectory: list       # rows, see TRAJECTORY_FIELDS
    commands: list         # dicts
    detections: list       # dicts
    protocol: list         # dicts
    frames: list           # FrameEvent
    t_task_start_ms: Optional[float]
    config: ScenarioConfig
    telemetry_messages: int = 0


TRAJECTORY_FIELDS = ["t_ms", "true_x", "true_y", "true_yaw", "est_x", "est_y", "est_yaw",
                     "v_cmd", "yaw_rate_cmd", "collision_flag"]


def _r(x: float, nd: int = 6) -> float:
    # round and drop negative zero, so logs are byte-stable
    v = round(float(x), nd)
    return 0.0 if v == 0 else v


def run_scenario(cfg: ScenarioConfig, seed: Optional[int] = None) -> RunResult:
    seed = cfg.seed if seed is None else seed
    link_rng, det_rng, drift_rng = (np.random.default_rng(s)
                                    for s in np.random.SeedSequence(seed).spawn(3))
    dt_ms = cfg.vehicle.sim_dt * 1000.0
    horizon_ms = (cfg.takeoff_time_s + cfg.max_task_time_s + cfg.landing_time_s + 5.0) * 1000.0
    frames = schedule_frames(cfg.link, horizon_ms, link_rng)
    detector = Detector(cfg.camera, cfg.noise, cfg.detection_threshold)
    targets = list(cfg.waypoints)
    a, b = targets[0], targets[1]
    start = Pose2D(a.x, a.y, math.degrees(math.atan2(b.y - a.y, b.x - a.x)))
    vs = VehicleState(start, start)
    pstate = PlannerState(target_index=1)
    cmd = Command()
    master, drone = MasterState(), DroneState()
    phys = FlightStatus.ON_GROUND
    phase_t0 = None

    radio: list = []  # heap of (deliver_t, seq, to_drone, Message)
    seq = 0
    trajectory, commands, detections, protocol = [], [], [], []
    history = [start]
    t_task_start = t_complete = None
    collision_flags = []
    task_xs, task_ys = [], []
    telemetry = 0
    next_frame = 0
    planner_tick = 0

    def send(t: float, msgs: list, to_drone: bool, deliver_at: Optional[float] = None):
        nonlocal seq
        for m in msgs:
            if m.kind == MessageKind.POSE_TELEMETRY:
                continue
            at = deliver_at if deliver_at is not None else t + cfg.link.command_uplink_ms.sample(link_rng)
            heapq.heappush(radio, (at, seq, to_drone, m))
            seq += 1

    def plog(t, side, before, after, msg_in, out):
        shown = [str(m) for m in out if m.kind != MessageKind.POSE_TELEMETRY]
        if msg_in is None and not shown and before == after:
            return
        protocol.append({"t_ms": _r(t, 3), "side": side, "state_before": before.name.lower(),
                         "state_after": after.name.lower(),
                         "msg_in": None if msg_in is None else str(msg_in), "msg_out": shown})

    def step_master(t, incoming=None, outbound=None, deliver_at=None):
        nonlocal master
        before = master.state
        master, out = master_step(master, incoming, outbound)
        plog(t, "master", before, master.state, incoming, out)
        send(t, out, True, deliver_at)

    def step_drone(t, incoming=None, task=None, pose=None):
        nonlocal drone, telemetry
        before = drone.state
        drone, out = drone_step(drone, incoming, phys, task, pose)
        telemetry += sum(1 for m in out if m.kind == MessageKind.POSE_TELEMETRY)
        plog(t, "drone", before, drone.state, incoming, out)
        send(t, out, False)

    tick = 0
    t_end = horizon_ms
    while True:
        t = tick * dt_ms
        if t > t_end:
            break
        # physical flight phases
        if drone.pending == SyncState.HOVERING and phys == FlightStatus.ON_GROUND:
            phase_t0 = t if phase_t0 is None else phase_t0
            if t - phase_t0 >= cfg.takeoff_time_s * 1000.0:
                phys, phase_t0 = FlightStatus.AT_HEIGHT, None
        elif drone.pending == SyncState.GROUND and phys != FlightStatus.LANDED:
            phase_t0 = t if phase_t0 is None else phase_t0
            if t - phase_t0 >= cfg.landing_time_s * 1000.0:
                phys, phase_t0 = FlightStatus.LANDED, None

        # frames finished on the offloading unit
        while next_frame < len(frames) and frames[next_frame].t_inference_done <= t:
            fr = frames[next_frame]
            next_frame += 1
            if master.state != SyncState.READY or master.pending is not None:
                continue
            if cfg.zero_latency:
                det_payload = DetectionData(fr.frame_index, None)  # sensed on delivery
            else:
                k = min(int(fr.t_capture_start // dt_ms), len(history) - 1)
                det, gt = detector.detect(history[k], cfg.obstacles, det_rng)
                detections.append(metrics.detection_record(fr.frame_index, fr.t_capture_start, det, gt))
                det_payload = DetectionData(fr.frame_index, det)
            step_master(t, outbound=det_payload, deliver_at=fr.t_command_applied)

        # radio deliveries
        while radio and radio[0][0] <= t:
            _, _, to_drone, msg = heapq.heappop(radio)
            if to_drone:
                if msg.kind == MessageKind.DETECTION_DATA:
                    step_drone(t, msg)
                    if drone.state != SyncState.READY or t_complete is not None:
                        continue
                    det = msg.payload.detection
                    if cfg.zero_latency:
                        det, gt = detector.detect(vs.true_pose, cfg.obstacles, det_rng)
                        detections.append(metrics.detection_record(msg.payload.frame_index, t, det, gt))
                    cmd, pstate, event, tr = planning_step(pstate, vs.est_pose, targets, det, cfg.planner)
                    fr = frames[msg.payload.frame_index]
                    commands.append({
                        "tick": planner_tick, "t_ms": _r(t, 3), "v": _r(cmd.v), "yaw_rate": _r(cmd.yaw_rate),
                        "risk": _r(tr.risk), "S": _r(tr.S), "v_rep": _r(tr.v_rep), "psi_r": _r(tr.psi_r),
                        "event": event.value, "frame_index": fr.frame_index,
                        "t_capture_ms": _r(t if cfg.zero_latency else fr.t_capture_start, 3)})
                    planner_tick += 1
                    if event == PlannerEvent.WAYPOINT_REACHED:
                        step_drone(t, task=TaskEvent.INTERMEDIATE_WAYPOINT)
                    elif event == PlannerEvent.MISSION_COMPLETE:
                        t_complete = t
                        step_drone(t, task=TaskEvent.FINAL_WAYPOINT)
                else:
                    step_drone(t, msg)
            else:
                step_master(t, msg)

        # idle ticks let both sides act on status changes
        step_master(t)
        step_drone(t, pose=PoseTelemetry(t, vs.est_pose.x, vs.est_pose.y, vs.est_pose.yaw))
        if drone.state == SyncState.READY and t_task_start is None:
            t_task_start = t
            phys = FlightStatus.TASK_RUNNING

        flying_task = drone.state == SyncState.READY and t_complete is None
        applied = cmd if flying_task else Command()
        vs = step_kinematics(vs, applied, cfg.vehicle, cfg.drift, drift_rng) if flying_task else vs
        tick += 1
        history.append(vs.true_pose)
        collide = check_collision(vs.true_pose, cfg.vehicle.drone_radius, cfg.obstacles) if flying_task else False
        if flying_task:
            collision_flags.append(collide)
            task_xs.append(vs.true_pose.x)
            task_ys.append(vs.true_pose.y)
        trajectory.append([_r(tick * dt_ms, 3), _r(vs.true_pose.x), _r(vs.true_pose.y), _r(vs.true_pose.yaw),
                           _r(vs.est_pose.x), _r(vs.est_pose.y), _r(vs.est_pose.yaw),
                           _r(applied.v), _r(applied.yaw_rate), int(collide)])

        if master.done and drone.state == SyncState.GROUND:
            break
        if t_task_start is not None and t_complete is None and t - t_task_start > cfg.max_task_time_s * 1000.0:
            break

    k_vel = cfg.planner.k_vel
    cls_name = cfg.obstacles[0].cls.value if cfg.obstacles else None
    if task_xs:
        xs = [start.x] + task_xs
        ys = [start.y] + task_ys
        report = metrics.run_summary(xs, ys, collision_flags, t_task_start, t_complete, k_vel, cls_name, seed)
    else:
        report = RunReport(None, 0.0, False, 0, k_vel, cls_name, seed)
    return RunResult(report, trajectory, commands, detections, protocol, frames, t_task_start, cfg, telemetry)


# ---------------------------------------------------------------- sweeps

SUMMARY_FIELDS = ["k_vel", "class", "success_pct", "mean_time_ms", "mean_length_m", "collisions"]


def cell_config(cfg: ScenarioConfig, k_vel: float, obstacle_class: Optional[str]) -> ScenarioConfig:
    obstacles = [] if obstacle_class is None else [
        ObstacleSpec.of_class(obstacle_class, cfg.waypoints[0].x + cfg.obstacle_distance,
                              cfg.waypoints[0].y + cfg.obstacle_offset_y)]
    return replace(cfg, planner=replace(cfg.planner, k_vel=k_vel), obstacles=obstacles)


def _run_cell_rep(args):
    cfg, k_vel, cls_name, rep, seed = args
    res = run_scenario(cell_config(cfg, k_vel, cls_name), derive_seed(seed, k_vel, cls_name or "none", rep))
    return res


@dataclass
class SweepResult:
    rows: list                                    # summary rows (dicts)
    runs: dict = field(default_factory=dict)      # (k_vel, class) -> [RunResult]

    def best_k_vel(self) -> Optional[float]:
        return best_k_vel(self.rows)


def aggregate(k_vel: float, cls_name: str, reports: Sequence[RunReport]) -> dict:
    ok = [r for r in reports if r.success]
    return {
        "k_vel": k_vel,
        "class": cls_name,
        "success_pct": 100.0 * len(ok) / len(reports) if reports else 0.0,
        "mean_time_ms": float(np.mean([r.completion_time_ms for r in ok])) if ok else math.nan,
        "mean_length_m": float(np.mean([r.path_length_m for r in ok])) if ok else math.nan,
        "collisions": int(sum(r.collisions for r in reports)),
    }


def sweep(cfg: ScenarioConfig, seed: Optional[int] = None, jobs: int = 1,
          classes: Optional[Sequence[Optional[str]]] = None) -> SweepResult:
    """k_vel x obstacle class x repetition grid. Per-run seeds make the result order-independent."""
    seed = cfg.seed if seed is None else seed
    classes = list(cfg.sweep_classes) if classes is None else list(classes)
    tasks = [(cfg, k, c, rep, seed) for k in cfg.k_vel_sweep for c in classes for rep in range(cfg.repetitions)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_cell_rep, tasks, chunksize=4))
    else:
        results = [_run_cell_rep(t) for t in tasks]
    runs: dict = {}
    for (_, k, c, _, _), res in zip(tasks, results):
        runs.setdefault((k, c), []).append(res)
    rows = [aggregate(k, c or "none", [r.report for r in rs]) for (k, c), rs in runs.items()]
    return SweepResult(rows, runs)


def best_k_vel(rows: Sequence[dict]) -> Optional[float]:
    """Rank k_vel values averaged over classes: success %, then time, then length."""
    by_k: dict = {}
    for r in rows:
        by_k.setdefault(r["k_vel"], []).append(r)

    def key(k):
        rs = by_k[k]
        times = [r["mean_time_ms"] for r in rs if not math.isnan(r["mean_time_ms"])]
        lengths = [r["mean_length_m"] for r in rs if not math.isnan(r["mean_length_m"])]
        return (-np.mean([r["success_pct"] for r in rs]),
                np.mean(times) if times else math.inf,
                np.mean(lengths) if lengths else math.inf)

    return min(by_k, key=key) if by_k else None


# ---------------------------------------------------------------- export

def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.6f}"
    return str(v)


def summary_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in SUMMARY_FIELDS])
    return buf.getvalue()


def trajectory_csv(rows: Sequence[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_FIELDS)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def jsonl(records: Sequence[dict]) -> str:
    return "".join(json.dumps(r, allow_nan=False) + "\n" for r in records)


_CLASS_COLORS = {"cube": "#c9a227", "short": "#e0b000", "large": "#d98c00", "column": "#b36b00"}
_PATH_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf"]


def render_svg(waypoints: Sequence[Waypoint], obstacles: Sequence[ObstacleSpec],
               paths: Sequence[Sequence[tuple[float, float]]], scale: float = 120.0,
               margin_m: float = 0.6, failed: Sequence[bool] = ()) -> str:
    """Top view: waypoints with capture circles, obstacle footprints, estimated-pose paths.

    World +y is drawn upward.
    """
    xs = [w.x for w in waypoints] + [p[0] for path in paths for p in path]
    ys = [w.y for w in waypoints] + [p[1] for path in paths for p in path]
    for o in obstacles:
        for cx, cy in o.corners():
            xs.append(cx)
            ys.append(cy)
    x0, x1 = min(xs) - margin_m, max(xs) + margin_m
    y0, y1 = min(ys) - margin_m, max(ys) + margin_m
    W, H = (x1 - x0) * scale, (y1 - y0) * scale

    def px(x, y):
        return f"{(x - x0) * scale:.2f},{(y1 - y) * scale:.2f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
           f'viewBox="0 0 {W:.2f} {H:.2f}">',
           f'<rect x="0" y="0" width="{W:.2f}" height="{H:.2f}" fill="white"/>']
    for o in obstacles:
        cx, cy = o.center_x - o.footprint_d / 2.0, o.center_y + o.footprint_w / 2.0
        out.append(f'<rect class="obstacle" data-class="{o.cls.value}" x="{(cx - x0) * scale:.2f}" '
                   f'y="{(y1 - cy) * scale:.2f}" width="{o.footprint_d * scale:.2f}" '
                   f'height="{o.footprint_w * scale:.2f}" fill="{_CLASS_COLORS[o.cls.value]}" '
                   f'fill-opacity="0.5" stroke="black"/>')
    for i, w in enumerate(waypoints):
        x, y = px(w.x, w.y).split(",")
        out.append(f'<circle class="capture" cx="{x}" cy="{y}" r="{w.capture_radius * scale:.2f}" '
                   f'fill="none" stroke="black" stroke-dasharray="4,3"/>')
        out.append(f'<circle class="waypoint" cx="{x}" cy="{y}" r="3" fill="black"/>')
        out.append(f'<text x="{x}" y="{float(y) - 8:.2f}" font-size="12">{chr(65 + i)}</text>')
    for i, path in enumerate(paths):
        pts = " ".join(px(x, y) for x, y in path)
        color = _PATH_COLORS[i % len(_PATH_COLORS)]
        out.append(f'<polyline class="path" points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if i < len(failed) and failed[i] and path:
            x, y = px(*path[-1]).split(",")
            out.append(f'<text class="failed" x="{x}" y="{y}" font-size="14" fill="{color}">*</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def run_svg(res: RunResult) -> str:
    path = [(r[4], r[5]) for r in res.trajectory]
    return render_svg(res.config.waypoints, res.config.obstacles, [path], failed=[not res.report.success])


def write_run(res: RunResult, out_dir, formats: Sequence[str] = ("csv", "jsonl", "svg")) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "csv" in formats:
            (out / "trajectory.csv").write_text(trajectory_csv(res.trajectory))
            (out / "frames.csv").write_text(frames_to_csv(res.frames))
        if "jsonl" in formats:
            (out / "commands.jsonl").write_text(jsonl(res.commands))
            (out / "protocol.jsonl").write_text(jsonl(res.protocol))
            (out / "detections.jsonl").write_text(jsonl(res.detections))
        if "svg" in formats:
            (out / "path.svg").write_text(run_svg(res))
        (out / "report.json").write_text(json.dumps(res.report.to_dict(), indent=2) + "\n")
        (out / "config.json").write_text(json.dumps(res.config.to_dict(), indent=2) + "\n")
    except OSError as e:
        raise OSError(f"cannot write run artifacts to {out}: {e}") from e
    return out


def write_sweep(result: SweepResult, out_dir, per_run: bool = True,
                formats: Sequence[str] = ("csv", "jsonl", "svg")) -> Path:
    out = Path(out_dir)
    try:
        (out / "sweep").mkdir(parents=True, exist_ok=True)
        (out / "sweep" / "summary.csv").write_text(summary_csv(result.rows))
        paths, failed, obstacles, cfg = [], [], [], None
        for (k, c), runs in result.runs.items():
            for rep, res in enumerate(runs):
                cfg = res.config
                paths.append([(r[4], r[5]) for r in res.trajectory])
                failed.append(not res.report.success)
                for o in res.config.obstacles:
                    if o not in obstacles:
                        obstacles.append(o)
                if per_run:
                    write_run(res, out / "runs" / f"k{k:g}_{c or 'none'}" / str(rep), formats)
        if cfg is not None and "svg" in formats:
            (out / "sweep" / "paths.svg").write_text(render_svg(cfg.waypoints, obstacles, paths, failed=failed))
    except OSError as e:
        raise OSError(f"cannot write sweep artifacts to {out}: {e}") from e
    return out
