"""Bicycle-model vehicle: steering law, exact-arc kinematics, a linear-tire
single-track model for slip studies, and the Ackermann front-wheel split.

All poses refer to the rear-axle midpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from .geometry import PlanarPose

MAX_STEER_DEFAULT = math.radians(70.0)
MIN_DYNAMIC_SPEED = 0.5  # m/s, below this the slip model is singular
_STRAIGHT_TOL = 1e-12


class InvalidStep(ValueError):
    pass


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 2.5
    track_width: float = 1.5
    max_steer: float = MAX_STEER_DEFAULT
    cornering_stiffness: float = 2.5e5  # N/rad per axle
    mass: float = 1500.0
    yaw_inertia: float = 2500.0
    cg_to_front: float = 1.1  # CG ahead of centre -> mild understeer

    def __post_init__(self):
        for name in ("wheelbase", "track_width", "max_steer", "cornering_stiffness",
                     "mass", "yaw_inertia", "cg_to_front"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        if self.max_steer >= math.pi / 2:
            raise ValueError("max_steer must be < pi/2")
        if self.cg_to_front >= self.wheelbase:
            raise ValueError("cg_to_front must be shorter than the wheelbase")

    @property
    def cg_to_rear(self) -> float:
        return self.wheelbase - self.cg_to_front


@dataclass(frozen=True)
class VehicleState:
    pose: PlanarPose
    speed: float = 0.0
    lateral_velocity: float = 0.0  # body-frame, at the rear axle
    yaw_rate: float = 0.0

    def __post_init__(self):
        for name in ("speed", "lateral_velocity", "yaw_rate"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.speed < 0:
            raise ValueError("speed must be >= 0")


@dataclass(frozen=True)
class ArcMotion:
    arc_length: float
    heading_change: float
    turn_radius: float  # math.inf on a straight step
    straight: bool


@dataclass(frozen=True)
class AckermannAngles:
    delta_left: float
    delta_right: float


def clamp_steer(steer: float, params: VehicleParams) -> float:
    return max(-params.max_steer, min(params.max_steer, steer))


def steering_from_lateral(dy: float, alpha: float, params: VehicleParams | None = None) -> float:
    """delta = atan(alpha * dy), clamped to the steering range when params are given."""
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    delta = math.atan(dy * alpha)
    if params is not None:
        delta = clamp_steer(delta, params)
    return delta


def canonical_alpha(params: VehicleParams, dx: float) -> float:
    """alpha = L / dx**2: the gain that turns a lateral offset at distance dx into a steering angle."""
    if not dx > 0:
        raise ValueError("dx must be > 0")
    return params.wheelbase / (dx * dx)


def steering_to_command(steer: float, params: VehicleParams) -> float:
    return max(-1.0, min(1.0, steer / params.max_steer))


def command_to_steering(command: float, params: VehicleParams) -> float:
    return max(-1.0, min(1.0, command)) * params.max_steer


def ackermann_split(steer: float, params: VehicleParams) -> AckermannAngles:
    """Split the single-track angle into left/right wheel angles.

    The inner wheel turns further by dd = delta**2 * W / L (both wheels share
    one turning centre) and the mean stays exactly delta. With left-positive
    angles that is left = delta + dd/2, right = delta - dd/2 in either direction.
    """
    if abs(steer) > params.max_steer:
        raise ValueError("steer exceeds max_steer")
    half = 0.5 * steer * steer * params.track_width / params.wheelbase
    return AckermannAngles(steer + half, steer - half)


def speed_lag(current: float, target: float, dt: float, tau: float = 0.5) -> float:
    """First-order lag of the realised speed towards the commanded speed."""
    return target + (current - target) * math.exp(-dt / tau)


def _check_step(steer: float, throttle_speed: float, dt: float, params: VehicleParams) -> None:
    if not dt > 0:
        raise InvalidStep(f"dt must be > 0, got {dt}")
    if throttle_speed < 0:
        raise InvalidStep("throttle_speed must be >= 0")
    if abs(steer) > params.max_steer + 1e-12:
        raise InvalidStep(f"|steer|={abs(steer):.6f} exceeds max_steer={params.max_steer:.6f}")


def step_kinematic(state: VehicleState, steer: float, throttle_speed: float, dt: float,
                   params: VehicleParams) -> tuple[VehicleState, ArcMotion]:
    """Advance the rear axle along the exact constant-curvature arc for one step."""
    _check_step(steer, throttle_speed, dt, params)
    p = state.pose
    arc = throttle_speed * dt
    t = math.tan(steer)
    if abs(t) < _STRAIGHT_TOL:
        pose = PlanarPose(p.x + arc * math.cos(p.heading), p.y + arc * math.sin(p.heading), p.heading)
        motion = ArcMotion(arc, 0.0, math.inf, True)
    else:
        radius = params.wheelbase / t  # signed, positive for left turns
        dphi = arc / radius
        if abs(dphi) > math.pi:
            raise InvalidStep("heading change exceeds pi in one step; reduce dt")
        phi1 = p.heading + dphi
        pose = PlanarPose(p.x + radius * (math.sin(phi1) - math.sin(p.heading)),
                          p.y - radius * (math.cos(phi1) - math.cos(p.heading)),
                          phi1)
        motion = ArcMotion(arc, dphi, abs(radius), False)
    return VehicleState(pose, throttle_speed, 0.0, throttle_speed * t / params.wheelbase), motion


def _lateral_matrix(u: float, steer: float, params: VehicleParams) -> np.ndarray:
    """Generator of the augmented linear system z' = M z, z = (v_rear, r, phi, 1).

    Tire forces are linear in the small-angle slips
        front: tan(delta) - (v_rear + L r) / u,   rear: -v_rear / u
    which vanish exactly on the kinematic (no-slip) motion.
    """
    L, lf, lr = params.wheelbase, params.cg_to_front, params.cg_to_rear
    C, m, iz = params.cornering_stiffness, params.mass, params.yaw_inertia
    c, t = math.cos(steer), math.tan(steer)
    # yaw acceleration: r' = a_rv v + a_rr r + b_r
    a_rv = (-lf * c * C + lr * C) / (iz * u)
    a_rr = -lf * c * C * L / (iz * u)
    b_r = lf * c * C * t / iz
    # lateral acceleration at the CG, then shifted to the rear axle
    a_vv = (-c * C - C) / (m * u) - lr * a_rv
    a_vr = -c * C * L / (m * u) - u - lr * a_rr
    b_v = c * C * t / m - lr * b_r
    return np.array([
        [a_vv, a_vr, 0.0, b_v],
        [a_rv, a_rr, 0.0, b_r],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ])


def step_dynamic(state: VehicleState, steer: float, throttle_speed: float, dt: float,
                 params: VehicleParams, substeps: int = 8) -> VehicleState:
    """Advance the slip-augmented single-track model by one step.

    Longitudinal speed is held at ``throttle_speed`` within the step, which
    makes the lateral/yaw subsystem linear; it is propagated exactly with a
    matrix exponential and the position is integrated by composite Simpson.
    """
    _check_step(steer, throttle_speed, dt, params)
    u = throttle_speed
    if u < MIN_DYNAMIC_SPEED:
        new, _ = step_kinematic(state, steer, throttle_speed, dt, params)
        return new
    n = substeps + substeps % 2
    h = dt / n
    E = expm(_lateral_matrix(u, steer, params) * h)
    z = np.array([state.lateral_velocity, state.yaw_rate, state.pose.heading, 1.0])
    zs = np.empty((n + 1, 4))
    zs[0] = z
    for k in range(n):
        z = E @ z
        zs[k + 1] = z
    v, phi = zs[:, 0], zs[:, 2]
    cphi, sphi = np.cos(phi), np.sin(phi)
    xdot = u * cphi - v * sphi
    ydot = u * sphi + v * cphi
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= h / 3.0
    p = state.pose
    pose = PlanarPose(p.x + float(w @ xdot), p.y + float(w @ ydot), float(zs[-1, 2]))
    return VehicleState(pose, u, float(zs[-1, 0]), float(zs[-1, 1]))


def with_speed(state: VehicleState, speed: float) -> VehicleState:
    return replace(state, speed=speed)
