"""Bounding-box-driven reactive planner.

Each call maps (pose estimate, current waypoint, optional detection) to a
forward-velocity and yaw-rate command. The collision risk comes from the
inflated box width, throttles speed through a smoothed safety factor, and
produces a repulsive yaw toward the less occupied image half-plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

from .geometry import Pose2D, Waypoint, relative_target
from .perception import BoundingBox, Detection


class PlannerEvent(str, Enum):
    NONE = "none"
    WAYPOINT_REACHED = "waypoint_reached"
    MISSION_COMPLETE = "mission_complete"


@dataclass(frozen=True)
class PlannerConfig:
    safety_margin_px: float = 20.0
    critical_halfwidth_px: float = 20.0
    risk_low_frac: float = 0.2
    risk_high_frac: float = 0.8
    alpha: float = 0.5
    beta: float = 0.5
    k_vel: float = 1.5
    v_max: float = 1.0
    yaw_rate_max: float = 60.0
    dt: float = 0.2
    image_width_px: float = 320.0

    def __post_init__(self):
        if not 0.0 <= self.risk_low_frac < self.risk_high_frac <= 1.0:
            raise ValueError("need 0 <= risk_low_frac < risk_high_frac <= 1")
        for name in ("alpha", "beta"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        for name in ("v_max", "yaw_rate_max", "dt", "image_width_px"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.k_vel < 0:
            raise ValueError("k_vel must be >= 0")


@dataclass(frozen=True)
class PlannerState:
    S_prev: float = 1.0
    v_rep_prev: float = 0.0
    target_index: int = 0
    # direction of the last repulsion, kept so a decaying v_rep keeps pushing the same way
    steer_sign: int = 1


@dataclass(frozen=True)
class Command:
    v: float = 0.0
    yaw_rate: float = 0.0


@dataclass(frozen=True)
class PlanTrace:
    """Intermediate values of one planning step, for the command log."""
    risk: float = 0.0
    S: float = 1.0
    v_rep: float = 0.0
    psi_r: float = 0.0
    psi_rep: float = 0.0


def inflate_and_clip(box: BoundingBox, cfg: PlannerConfig) -> tuple[float, float]:
    W = cfg.image_width_px
    return max(0.0, box.xm - cfg.safety_margin_px), min(W, box.xM + cfg.safety_margin_px)


def intersects_critical_fov(span: tuple[float, float], cfg: PlannerConfig) -> bool:
    xl, xr = span
    c = cfg.image_width_px / 2.0
    return xl <= c <= xr


def collision_risk(span: tuple[float, float], cfg: PlannerConfig) -> float:
    if not intersects_critical_fov(span, cfg):
        return 0.0
    frac = (span[1] - span[0]) / cfg.image_width_px
    risk = (frac - cfg.risk_low_frac) / (cfg.risk_high_frac - cfg.risk_low_frac)
    return min(1.0, max(0.0, risk))


def safety_factor(risk: float) -> float:
    return (risk - 1.0) ** 2


def smooth(prev: float, raw: float, coeff: float) -> float:
    return coeff * raw + (1.0 - coeff) * prev


def width_of_interest(span: tuple[float, float], cfg: PlannerConfig) -> tuple[float, int]:
    """Obstacle width in the half-plane we steer toward, and the steer sign.

    The less occupied half wins; +1 means steer left (positive yaw). Ties go left.
    """
    xl, xr = span
    c = cfg.image_width_px / 2.0
    left = max(0.0, min(xr, c) - max(xl, 0.0))
    right = max(0.0, min(xr, cfg.image_width_px) - max(xl, c))
    if left <= right:
        return left, 1
    return right, -1


def repulsive_velocity(woi: float, cfg: PlannerConfig) -> float:
    return cfg.k_vel * woi / (cfg.image_width_px / 2.0)


def forward_velocity(x_r: float, y_r: float, psi_r: float, S: float, cfg: PlannerConfig) -> float:
    # heading attenuation uses |psi_r| so it is symmetric and never exceeds 1
    heading = abs(abs(psi_r) / 180.0 - 1.0)
    return min(cfg.v_max, math.hypot(x_r, y_r) * S * heading)


def repulsive_yaw(v_rep: float, v_d: float) -> float:
    if v_rep == 0.0 and v_d == 0.0:
        return 0.0
    return math.degrees(math.atan2(v_rep, v_d))


def yaw_rate(psi_r: float, S: float, psi_rep: float, steer_sign: int, cfg: PlannerConfig) -> float:
    raw = (psi_r * S + steer_sign * psi_rep) / cfg.dt
    return min(cfg.yaw_rate_max, max(-cfg.yaw_rate_max, raw))


def target_reached(pose: Pose2D, target: Waypoint) -> bool:
    return math.hypot(target.x - pose.x, target.y - pose.y) <= target.capture_radius


def planning_step(state: PlannerState, pose: Pose2D, targets: Sequence[Waypoint],
                  det: Optional[Detection], cfg: PlannerConfig
                  ) -> tuple[Command, PlannerState, PlannerEvent, PlanTrace]:
    """One iteration of the reactive planner. Pure: the new state is returned."""
    if not targets:
        raise ValueError("targets must be non-empty")
    if not 0 <= state.target_index < len(targets):
        raise ValueError(f"target_index {state.target_index} out of range")
    target = targets[state.target_index]

    if target_reached(pose, target):
        nxt = state.target_index + 1
        if nxt >= len(targets):
            event = PlannerEvent.MISSION_COMPLETE
            nxt = state.target_index
        else:
            event = PlannerEvent.WAYPOINT_REACHED
        trace = PlanTrace(0.0, state.S_prev, state.v_rep_prev, 0.0, 0.0)
        return Command(0.0, 0.0), replace(state, target_index=nxt), event, trace

    risk = 0.0
    S_raw = 1.0
    v_rep_raw = 0.0
    sign = state.steer_sign
    if det is not None:
        span = inflate_and_clip(det.box, cfg)
        risk = collision_risk(span, cfg)
        S_raw = safety_factor(risk)
        if risk > 0:
            woi, sign = width_of_interest(span, cfg)
            v_rep_raw = repulsive_velocity(woi, cfg)
    v_rep = smooth(state.v_rep_prev, v_rep_raw, cfg.beta)
    S = smooth(state.S_prev, S_raw, cfg.alpha)

    rel = relative_target(pose, target)
    v_d = forward_velocity(rel.x_g, rel.y_g, rel.psi_r, S, cfg)
    psi_rep = repulsive_yaw(v_rep, v_d)
    rate = yaw_rate(rel.psi_r, S, psi_rep, sign, cfg)

    new_state = PlannerState(S, v_rep, state.target_index, sign)
    trace = PlanTrace(risk, S, v_rep, rel.psi_r, psi_rep)
    return Command(v_d, rate), new_state, PlannerEvent.NONE, trace
