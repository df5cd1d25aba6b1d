"""Planar pose algebra and the local-frame motion used for steering labels.

Poses are (x, y, heading) in a global frame. Lateral quantities are
left-positive throughout the package: a positive ``dy`` means the motion
bends to the left of the previous direction of travel, and maps to a
positive steering angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EPS_ZERO = 1e-9


class DegenerateVector(ValueError):
    """A displacement is too short to define a direction of travel."""


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


def _check_finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class PlanarPose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        _check_finite(x=self.x, y=self.y, heading=self.heading)
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def compose(self, other: PlanarPose) -> PlanarPose:
        """Apply ``other`` (expressed in this pose's frame) on top of this pose."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        return PlanarPose(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.heading + other.heading,
        )

    def inverse(self) -> PlanarPose:
        c, s = math.cos(self.heading), math.sin(self.heading)
        return PlanarPose(-c * self.x - s * self.y, s * self.x - c * self.y, -self.heading)


@dataclass(frozen=True)
class PlanarVec:
    vx: float
    vy: float

    def __post_init__(self):
        _check_finite(vx=self.vx, vy=self.vy)

    @classmethod
    def between(cls, a: PlanarPose, b: PlanarPose) -> PlanarVec:
        return cls(b.x - a.x, b.y - a.y)

    @property
    def norm(self) -> float:
        return math.hypot(self.vx, self.vy)


@dataclass(frozen=True)
class RelativeMotion:
    dx: float  # forward, local frame
    dy: float  # lateral, left-positive


def compose(a: PlanarPose, b: PlanarPose) -> PlanarPose:
    return a.compose(b)


def relative_pose(frm: PlanarPose, to: PlanarPose) -> PlanarPose:
    """Pose of ``to`` expressed in the frame of ``frm``."""
    c, s = math.cos(frm.heading), math.sin(frm.heading)
    ddx, ddy = to.x - frm.x, to.y - frm.y
    return PlanarPose(c * ddx + s * ddy, -s * ddx + c * ddy, to.heading - frm.heading)


def align_rotation(v: PlanarVec) -> float:
    """Angle theta such that R(theta) @ v == (|v|, 0)."""
    if v.norm <= EPS_ZERO:
        raise DegenerateVector(f"vector ({v.vx}, {v.vy}) has norm <= {EPS_ZERO}")
    return wrap_angle(-math.atan2(v.vy, v.vx))


def local_motion(v_prev: PlanarVec, v_curr: PlanarVec) -> RelativeMotion:
    """Express ``v_curr`` in the frame whose x-axis is the direction of ``v_prev``.

    Rotating by theta = align_rotation(v_prev) gives the forward and lateral
    components. The lateral sign equals the sign of the cross product
    v_prev x v_curr, so a left-hand bend yields dy > 0.
    """
    theta = align_rotation(v_prev)
    c, s = math.cos(theta), math.sin(theta)
    dx = c * v_curr.vx - s * v_curr.vy
    dy = s * v_curr.vx + c * v_curr.vy
    return RelativeMotion(dx, dy)


def cross(a: PlanarVec, b: PlanarVec) -> float:
    return a.vx * b.vy - a.vy * b.vx


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def yaw_from_quaternion(qx: float, qy: float, qz: float, qw: float) -> float:
    """Heading (rotation about z) of a unit quaternion; roll and pitch are discarded."""
    return math.atan2(2.0 * (qw * qz + qx * qy), 1.0 - 2.0 * (qy * qy + qz * qz))


def quaternion_from_yaw(yaw: float) -> tuple[float, float, float, float]:
    return 0.0, 0.0, math.sin(yaw / 2.0), math.cos(yaw / 2.0)
