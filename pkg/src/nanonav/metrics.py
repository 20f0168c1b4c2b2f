"""Detection and navigation metrics.

Detection scoring is single-class: every obstacle class is folded into one
generic class before matching. AP uses COCO conventions (greedy matching in
score order, 101-point interpolated precision) and is reported on [0, 100].
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .geometry import Pose2D
from .perception import BoundingBox, Detector, ObstacleSpec

COCO_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


@dataclass
class FrameRecord:
    frame_index: int
    detections: list = field(default_factory=list)    # [(BoundingBox, score)]
    ground_truths: list = field(default_factory=list)  # [BoundingBox]


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.xM, b.xM) - max(a.xm, b.xm)
    ih = min(a.yM, b.yM) - max(a.ym, b.ym)
    inter = max(0.0, iw) * max(0.0, ih)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def match_frame(frame: FrameRecord, threshold: float) -> list[tuple[float, bool]]:
    """(score, is_true_positive) per detection, highest score first.

    Each detection takes the unmatched ground truth of highest IoU, provided
    that IoU reaches the threshold.
    """
    order = sorted(range(len(frame.detections)), key=lambda i: -frame.detections[i][1])
    taken = [False] * len(frame.ground_truths)
    out = []
    for i in order:
        box, score = frame.detections[i]
        best_j, best_iou = -1, threshold
        for j, gt in enumerate(frame.ground_truths):
            if taken[j]:
                continue
            o = iou(box, gt)
            if o >= best_iou:
                best_j, best_iou = j, o
        if best_j >= 0:
            taken[best_j] = True
        out.append((score, best_j >= 0))
    return out


def ap_at_iou(frames: Sequence[FrameRecord], threshold: float) -> float:
    """Single-class AP in [0, 100]; NaN when the frames hold no ground truth."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    n_gt = sum(len(f.ground_truths) for f in frames)
    if n_gt == 0:
        return math.nan
    matched = [m for f in frames for m in match_frame(f, threshold)]
    if not matched:
        return 0.0
    scores = np.array([s for s, _ in matched])
    tps = np.array([t for _, t in matched], dtype=float)
    order = np.argsort(-scores, kind="mergesort")
    tp = np.cumsum(tps[order])
    fp = np.cumsum(1.0 - tps[order])
    precision = tp / (tp + fp)
    # precision envelope, right to left
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    # first rank whose recall reaches each point; integer form of recall >= i/100
    idx = np.searchsorted(tp * 100, np.arange(101) * n_gt, side="left")
    interp = np.where(idx < len(precision), precision[np.minimum(idx, len(precision) - 1)], 0.0)
    return float(interp.mean() * 100.0)


def coco_map(frames: Sequence[FrameRecord]) -> float:
    return float(np.mean([ap_at_iou(frames, t) for t in COCO_THRESHOLDS]))


def window_map(frames: Sequence[FrameRecord], window: int = 10, stride: int = 1
               ) -> tuple[list[float], float]:
    """AP@0.5 over every run of ``window`` consecutive frames, and the mean.

    Windows without ground truth score NaN and are left out of the mean.
    """
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be >= 1")
    if len(frames) < window:
        raise ValueError(f"need at least {window} frames, got {len(frames)}")
    series = [ap_at_iou(frames[i:i + window], 0.5) for i in range(0, len(frames) - window + 1, stride)]
    finite = [s for s in series if not math.isnan(s)]
    mean = float(np.mean(finite)) if finite else math.nan
    return series, mean


# ---------------------------------------------------------------- logs

def detection_record(frame_index: int, t_ms: float, detection, ground_truth) -> dict:
    return {
        "frame_index": frame_index,
        "t_ms": round(t_ms, 3),
        "detection": None if detection is None else detection.to_dict(),
        "ground_truth": None if ground_truth is None else ground_truth.box.to_dict(),
    }


def frames_from_records(records: Iterable[dict]) -> list[FrameRecord]:
    frames = []
    for r in records:
        dets = []
        if r.get("detection") is not None:
            d = r["detection"]
            dets.append((BoundingBox.from_dict(d), float(d["score"])))
        gts = [] if r.get("ground_truth") is None else [BoundingBox.from_dict(r["ground_truth"])]
        frames.append(FrameRecord(int(r["frame_index"]), dets, gts))
    return frames


def read_detection_log(path) -> list[FrameRecord]:
    with open(path) as fh:
        return frames_from_records(json.loads(line) for line in fh if line.strip())


def approach_poses(n_frames: int = 200, start_x: float = 0.0, stop_x: float = 1.5,
                   wobble_deg: float = 15.0, wobble_period: int = 40,
                   sway_m: float = 0.15) -> list[Pose2D]:
    """A straight approach along +x with a sinusoidal heading wobble and lateral sway."""
    out = []
    for k in range(n_frames):
        u = k / max(1, n_frames - 1)
        ph = 2.0 * math.pi * k / wobble_period
        out.append(Pose2D(start_x + u * (stop_x - start_x), sway_m * math.sin(0.5 * ph),
                          wobble_deg * math.sin(ph)))
    return out


def synthetic_detection_log(detector: Detector, poses: Sequence[Pose2D],
                            obstacles: Sequence[ObstacleSpec], rng: np.random.Generator,
                            frame_period_ms: float = 123.0) -> list[dict]:
    """Detection-log records (same schema as a run's detections.jsonl) along ``poses``."""
    records = []
    for k, pose in enumerate(poses):
        det, gt = detector.detect(pose, obstacles, rng)
        records.append(detection_record(k, k * frame_period_ms, det, gt))
    return records


# ---------------------------------------------------------------- navigation

@dataclass
class RunReport:
    completion_time_ms: Optional[float]
    path_length_m: float
    success: bool
    collisions: int
    k_vel: float
    obstacle_class: Optional[str]
    seed: int

    def to_dict(self) -> dict:
        return {
            "completion_time_ms": self.completion_time_ms,
            "path_length_m": self.path_length_m,
            "success": self.success,
            "collisions": self.collisions,
            "k_vel": self.k_vel,
            "obstacle_class": self.obstacle_class,
            "seed": self.seed,
        }


def count_collisions(flags: Sequence[bool]) -> int:
    """Contiguous colliding intervals count once."""
    n = 0
    prev = False
    for f in flags:
        if f and not prev:
            n += 1
        prev = f
    return n


def run_summary(xs: Sequence[float], ys: Sequence[float], collision_flags: Sequence[bool],
                t_task_start_ms: float, t_complete_ms: Optional[float],
                k_vel: float = 0.0, obstacle_class: Optional[str] = None, seed: int = 0) -> RunReport:
    """Summarize a task-phase trajectory of true positions.

    Success means the mission-complete event fired with no collision.
    """
    if len(xs) == 0:
        raise ValueError("trajectory must be non-empty")
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    length = float(np.hypot(np.diff(x), np.diff(y)).sum())
    collisions = count_collisions(collision_flags)
    completion = None if t_complete_ms is None else t_complete_ms - t_task_start_ms
    return RunReport(completion, length, bool(t_complete_ms is not None and collisions == 0),
                     collisions, k_vel, obstacle_class, seed)
