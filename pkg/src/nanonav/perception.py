"""Synthetic obstacle detector and best-detection selection.

A pinhole camera projects world boxes into image-plane bounding boxes. The
projection is then corrupted by a simple noise model that stands in for the
offloaded neural detector. Image origin is top-left, x to the right, y down.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .geometry import Pose2D, relative_distance

UNIT_BOX = 0.5  # m, edge of one obstacle box
_NEAR_PLANE = 1e-3  # m


class ObstacleClass(str, Enum):
    CUBE = "cube"
    SHORT = "short"
    LARGE = "large"
    COLUMN = "column"


# (footprint_w along global y, footprint_d along global x, height), in unit boxes
_CLASS_DIMS = {
    ObstacleClass.CUBE: (1, 1, 1),
    ObstacleClass.SHORT: (1, 1, 2),
    ObstacleClass.LARGE: (2, 1, 1),
    ObstacleClass.COLUMN: (1, 1, 3),
}


@dataclass(frozen=True)
class CameraModel:
    width_px: int = 320
    height_px: int = 240
    hfov_deg: float = 50.0
    mount_yaw_deg: float = 0.0
    mount_height_m: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.hfov_deg < 180.0:
            raise ValueError("hfov_deg must be in (0, 180)")
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("image size must be positive")

    @property
    def focal_px(self) -> float:
        return (self.width_px / 2.0) / math.tan(math.radians(self.hfov_deg) / 2.0)


@dataclass(frozen=True)
class BoundingBox:
    xm: float
    ym: float
    xM: float
    yM: float

    @property
    def width(self) -> float:
        return self.xM - self.xm

    @property
    def height(self) -> float:
        return self.yM - self.ym

    @property
    def area(self) -> float:
        return max(0.0, self.width) * max(0.0, self.height)

    def is_valid(self, width_px: float = 320, height_px: float = 240) -> bool:
        return 0 <= self.xm <= self.xM <= width_px and 0 <= self.ym <= self.yM <= height_px

    def mirrored(self, width_px: float = 320) -> "BoundingBox":
        return BoundingBox(width_px - self.xM, self.ym, width_px - self.xm, self.yM)

    def to_dict(self) -> dict:
        return {"xm": self.xm, "ym": self.ym, "xM": self.xM, "yM": self.yM}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundingBox":
        return cls(float(d["xm"]), float(d["ym"]), float(d["xM"]), float(d["yM"]))


@dataclass(frozen=True)
class Detection:
    obstacle_id: ObstacleClass
    score: float
    box: BoundingBox

    def to_dict(self) -> dict:
        return {"class": self.obstacle_id.value, "score": self.score, **self.box.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Detection":
        return cls(ObstacleClass(d["class"]), float(d["score"]), BoundingBox.from_dict(d))


@dataclass(frozen=True)
class ObstacleSpec:
    cls: ObstacleClass
    center_x: float
    center_y: float
    footprint_w: float  # extent along global y
    footprint_d: float  # extent along global x
    height: float

    @classmethod
    def of_class(cls, obstacle_class, center_x: float, center_y: float = 0.0) -> "ObstacleSpec":
        obstacle_class = ObstacleClass(obstacle_class)
        w, d, h = _CLASS_DIMS[obstacle_class]
        return cls(obstacle_class, center_x, center_y, w * UNIT_BOX, d * UNIT_BOX, h * UNIT_BOX)

    def corners(self) -> list[tuple[float, float]]:
        hx, hy = self.footprint_d / 2.0, self.footprint_w / 2.0
        cx, cy = self.center_x, self.center_y
        return [(cx - hx, cy - hy), (cx + hx, cy - hy), (cx + hx, cy + hy), (cx - hx, cy + hy)]

    def contains(self, x: float, y: float) -> bool:
        return (abs(x - self.center_x) <= self.footprint_d / 2.0
                and abs(y - self.center_y) <= self.footprint_w / 2.0)


@dataclass(frozen=True)
class DetectionNoise:
    edge_jitter_sigma: float = 0.0
    miss_rate: float = 0.0
    false_positive_rate: float = 0.0
    score_range: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.edge_jitter_sigma < 0:
            raise ValueError("edge_jitter_sigma must be >= 0")
        for name in ("miss_rate", "false_positive_rate"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        lo, hi = self.score_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError("score_range must satisfy 0 <= low <= high <= 1")
        object.__setattr__(self, "score_range", (float(lo), float(hi)))

    @property
    def is_identity(self) -> bool:
        return (self.edge_jitter_sigma == 0 and self.miss_rate == 0
                and self.false_positive_rate == 0 and self.score_range == (1.0, 1.0))


def select_detection(raw: Sequence[tuple[BoundingBox, ObstacleClass, float]],
                     threshold: float = 0.5) -> Optional[Detection]:
    """Keep the highest-scoring candidate with threshold < score <= 1.

    Strict comparison means the first of several equal scores wins.
    """
    best = None
    max_score = threshold
    for box, obstacle_class, score in raw:
        if score > max_score and score <= 1.0:
            max_score = score
            best = Detection(ObstacleClass(obstacle_class), float(score), box)
    return best


def _clip_polygon_near(points: list[tuple[float, float]], near: float) -> list[tuple[float, float]]:
    # Sutherland-Hodgman against the half-plane forward >= near
    out = []
    n = len(points)
    for i in range(n):
        p, q = points[i], points[(i + 1) % n]
        p_in, q_in = p[0] >= near, q[0] >= near
        if p_in:
            out.append(p)
        if p_in != q_in:
            t = (near - p[0]) / (q[0] - p[0])
            out.append((near, p[1] + t * (q[1] - p[1])))
    return out


def project_obstacle(camera: CameraModel, pose: Pose2D, obstacle: ObstacleSpec) -> Optional[BoundingBox]:
    """Image-plane box of an obstacle seen from ``pose``, or None when out of view.

    Footprint corners go to the camera frame, the footprint is clipped at a
    near plane, and the silhouette is the min/max over the projected vertices
    of the clipped prism (exact for a box).
    """
    cam_pose = Pose2D(pose.x, pose.y, pose.yaw + camera.mount_yaw_deg)
    pts = [relative_distance(cam_pose, cx - pose.x, cy - pose.y) for cx, cy in obstacle.corners()]
    pts = _clip_polygon_near(pts, _NEAR_PLANE)
    if not pts:
        return None
    f = camera.focal_px
    cx_img, cy_img = camera.width_px / 2.0, camera.height_px / 2.0
    xs = [cx_img - f * left / fwd for fwd, left in pts]
    x_lo, x_hi = min(xs), max(xs)
    if x_hi <= 0.0 or x_lo >= camera.width_px:
        return None
    h = camera.mount_height_m
    tops = [cy_img - f * (obstacle.height - h) / fwd for fwd, _ in pts]
    bottoms = [cy_img + f * h / fwd for fwd, _ in pts]
    y_lo, y_hi = min(tops), max(bottoms)
    if y_hi <= 0.0 or y_lo >= camera.height_px:
        return None
    return clip_box(x_lo, y_lo, x_hi, y_hi, camera.width_px, camera.height_px)


def clip_box(x0: float, y0: float, x1: float, y1: float, width_px: float, height_px: float) -> BoundingBox:
    xm, xM = sorted((x0, x1))
    ym, yM = sorted((y0, y1))
    return BoundingBox(min(max(xm, 0.0), width_px), min(max(ym, 0.0), height_px),
                       min(max(xM, 0.0), width_px), min(max(yM, 0.0), height_px))


def perturb_detection(det: Optional[Detection], noise: DetectionNoise, rng: np.random.Generator,
                      camera: CameraModel = CameraModel()) -> Optional[Detection]:
    """Corrupt a ground-truth detection: misses, edge jitter, false positives, scores.

    Class labels are never changed.
    """
    if noise.is_identity:
        return det
    lo, hi = noise.score_range
    if det is None:
        if noise.false_positive_rate > 0 and rng.random() < noise.false_positive_rate:
            w = rng.uniform(10.0, camera.width_px / 2.0)
            h = rng.uniform(10.0, camera.height_px / 2.0)
            x0 = rng.uniform(0.0, camera.width_px - w)
            y0 = rng.uniform(0.0, camera.height_px - h)
            cls = list(ObstacleClass)[int(rng.integers(len(ObstacleClass)))]
            box = BoundingBox(x0, y0, x0 + w, y0 + h)
            return Detection(cls, float(rng.uniform(lo, hi)), box)
        return None
    if noise.miss_rate > 0 and rng.random() < noise.miss_rate:
        return None
    b = det.box
    if noise.edge_jitter_sigma > 0:
        j = rng.normal(0.0, noise.edge_jitter_sigma, size=4)
        b = clip_box(b.xm + j[0], b.ym + j[1], b.xM + j[2], b.yM + j[3], camera.width_px, camera.height_px)
    return replace(det, score=float(rng.uniform(lo, hi)), box=b)


@dataclass
class Detector:
    """Geometric oracle + noise + selection, as one call per frame."""
    camera: CameraModel = field(default_factory=CameraModel)
    noise: DetectionNoise = field(default_factory=DetectionNoise)
    threshold: float = 0.5

    def ground_truth(self, pose: Pose2D, obstacles: Sequence[ObstacleSpec]) -> Optional[Detection]:
        # nearest visible obstacle; scenarios use a single obstacle
        best = None
        best_d = math.inf
        for ob in obstacles:
            box = project_obstacle(self.camera, pose, ob)
            if box is None or box.width <= 0:
                continue
            d = math.hypot(ob.center_x - pose.x, ob.center_y - pose.y)
            if d < best_d:
                best, best_d = Detection(ob.cls, 1.0, box), d
        return best

    def detect(self, pose: Pose2D, obstacles: Sequence[ObstacleSpec],
               rng: np.random.Generator) -> tuple[Optional[Detection], Optional[Detection]]:
        """Returns (selected detection, ground truth)."""
        gt = self.ground_truth(pose, obstacles)
        noisy = perturb_detection(gt, self.noise, rng, self.camera)
        raw = [] if noisy is None else [(noisy.box, noisy.obstacle_id, noisy.score)]
        return select_detection(raw, self.threshold), gt
