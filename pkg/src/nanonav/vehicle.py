"""Kinematic drone model with first-order command tracking and a drifting pose estimate."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import Pose2D
from .perception import ObstacleSpec
from .planner import Command


@dataclass(frozen=True)
class VehicleParams:
    sim_dt: float = 0.01
    v_time_constant: float = 0.3
    yaw_time_constant: float = 0.6
    drone_radius: float = 0.07

    def __post_init__(self):
        for name in ("sim_dt", "v_time_constant", "yaw_time_constant", "drone_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class DriftModel:
    per_step_xy_sigma: float = 0.0
    per_step_yaw_sigma: float = 0.0

    def __post_init__(self):
        if self.per_step_xy_sigma < 0 or self.per_step_yaw_sigma < 0:
            raise ValueError("drift sigmas must be >= 0")

    @property
    def is_zero(self) -> bool:
        return self.per_step_xy_sigma == 0 and self.per_step_yaw_sigma == 0


@dataclass(frozen=True)
class VehicleState:
    true_pose: Pose2D = Pose2D()
    est_pose: Pose2D = Pose2D()
    v_current: float = 0.0
    yaw_rate_current: float = 0.0


def _integrate(pose: Pose2D, v: float, rate: float, dt: float) -> Pose2D:
    yaw = pose.yaw + rate * dt
    r = math.radians(yaw)
    return Pose2D(pose.x + v * math.cos(r) * dt, pose.y + v * math.sin(r) * dt, yaw)


def estimate_pose(pose: Pose2D, drift: DriftModel, rng: Optional[np.random.Generator]) -> Pose2D:
    """Add one step of random-walk error. Applied to a propagated estimate the error accumulates."""
    if drift.is_zero or rng is None:
        return pose
    dx, dy = rng.normal(0.0, drift.per_step_xy_sigma, size=2)
    dyaw = rng.normal(0.0, drift.per_step_yaw_sigma)
    return Pose2D(pose.x + dx, pose.y + dy, pose.yaw + dyaw)


def step_kinematics(state: VehicleState, cmd: Command, params: VehicleParams,
                    drift: DriftModel = DriftModel(), rng: Optional[np.random.Generator] = None
                    ) -> VehicleState:
    dt = params.sim_dt
    # clamp the Euler gain so the lag never overshoots for dt > tau
    kv = min(1.0, dt / params.v_time_constant)
    kw = min(1.0, dt / params.yaw_time_constant)
    v = state.v_current + (cmd.v - state.v_current) * kv
    w = state.yaw_rate_current + (cmd.yaw_rate - state.yaw_rate_current) * kw
    true_pose = _integrate(state.true_pose, v, w, dt)
    est_pose = estimate_pose(_integrate(state.est_pose, v, w, dt), drift, rng)
    return VehicleState(true_pose, est_pose, v, w)


def disc_rect_distance(x: float, y: float, ob: ObstacleSpec) -> float:
    """Distance from a point to an obstacle footprint (0 inside)."""
    dx = max(abs(x - ob.center_x) - ob.footprint_d / 2.0, 0.0)
    dy = max(abs(y - ob.center_y) - ob.footprint_w / 2.0, 0.0)
    return math.hypot(dx, dy)


def check_collision(true_pose: Pose2D, drone_radius: float, obstacles: Sequence[ObstacleSpec]) -> bool:
    return any(disc_rect_distance(true_pose.x, true_pose.y, ob) < drone_radius for ob in obstacles)


def path_length(poses: Sequence[Pose2D]) -> float:
    return sum(math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(poses, poses[1:]))
