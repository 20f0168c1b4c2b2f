"""Planar reference frames: global frame anchored at the start waypoint, body frame on the drone.

All exposed angles are in degrees; positive yaw is counter-clockwise (z up).
"""
from __future__ import annotations

import math
from dataclasses import dataclass


def wrap_deg(angle: float) -> float:
    """Normalize an angle in degrees into (-180, 180]."""
    a = math.fmod(angle, 360.0)
    if a > 180.0:
        a -= 360.0
    elif a <= -180.0:
        a += 360.0
    return a


@dataclass(frozen=True)
class Pose2D:
    x: float = 0.0    # m, global frame
    y: float = 0.0    # m, global frame
    yaw: float = 0.0  # deg, (-180, 180]

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.yaw)):
            raise ValueError(f"pose must be finite, got ({self.x}, {self.y}, {self.yaw})")
        object.__setattr__(self, "yaw", wrap_deg(self.yaw))


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    capture_radius: float = 0.10

    def __post_init__(self):
        if not self.capture_radius > 0:
            raise ValueError("capture_radius must be positive")


@dataclass(frozen=True)
class RelativeTarget:
    x_g: float
    y_g: float
    dx_rel: float
    dy_rel: float
    psi_r: float

    @property
    def distance(self) -> float:
        return math.hypot(self.x_g, self.y_g)


def global_distance(pose: Pose2D, target: Waypoint) -> tuple[float, float]:
    return target.x - pose.x, target.y - pose.y


def relative_distance(pose: Pose2D, x_g: float, y_g: float) -> tuple[float, float]:
    """Rotate a global-frame displacement by -yaw into the body frame."""
    c = math.cos(math.radians(pose.yaw))
    s = math.sin(math.radians(pose.yaw))
    return c * x_g + s * y_g, -s * x_g + c * y_g


def body_to_global(pose: Pose2D, dx_rel: float, dy_rel: float) -> tuple[float, float]:
    c = math.cos(math.radians(pose.yaw))
    s = math.sin(math.radians(pose.yaw))
    return c * dx_rel - s * dy_rel, s * dx_rel + c * dy_rel


def heading_offset(dx_rel: float, dy_rel: float) -> float:
    if dx_rel == 0.0 and dy_rel == 0.0:
        return 0.0
    return wrap_deg(math.degrees(math.atan2(dy_rel, dx_rel)))


def relative_target(pose: Pose2D, target: Waypoint) -> RelativeTarget:
    x_g, y_g = global_distance(pose, target)
    dx, dy = relative_distance(pose, x_g, y_g)
    return RelativeTarget(x_g, y_g, dx, dy, heading_offset(dx, dy))
