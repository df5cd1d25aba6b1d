"""Courses: centerlines built from line and arc segments, with a driving
corridor and per-segment driving commands (L/S/R)."""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import PlanarPose, wrap_angle

COMMANDS = ("L", "S", "R")
DEFAULT_HALF_WIDTH = 1.75
_JOINT_TOL = 1e-6


class CourseError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    kind: str  # "line" | "arc"
    length: float
    curvature: float = 0.0
    command: str = "S"

    def __post_init__(self):
        if self.kind not in ("line", "arc"):
            raise CourseError(f"unknown segment type {self.kind!r}")
        if not self.length > 0:
            raise CourseError("segment length must be > 0")
        if self.kind == "line" and self.curvature != 0.0:
            raise CourseError("line segments have zero curvature")
        if self.kind == "arc" and self.curvature == 0.0:
            raise CourseError("arc segments need nonzero curvature")
        if self.command not in COMMANDS:
            raise CourseError(f"command must be one of {COMMANDS}, got {self.command!r}")


def line(length: float) -> Segment:
    return Segment("line", length, 0.0, "S")


def arc(length: float, curvature: float, command: str | None = None) -> Segment:
    if command is None:
        command = "L" if curvature > 0 else "R"
    return Segment("arc", length, curvature, command)


def _advance(x, y, th, kappa, s):
    if kappa == 0.0:
        return x + s * math.cos(th), y + s * math.sin(th), th
    th1 = th + kappa * s
    return (x + (math.sin(th1) - math.sin(th)) / kappa,
            y - (math.cos(th1) - math.cos(th)) / kappa, th1)


@dataclass
class Course:
    segments: list[Segment]
    id: str = "course"
    corridor_half_width: float = DEFAULT_HALF_WIDTH
    start: PlanarPose = field(default_factory=lambda: PlanarPose(0.0, 0.0, 0.0))

    def __post_init__(self):
        if not self.segments:
            raise CourseError("course needs at least one segment")
        if not self.corridor_half_width > 0:
            raise CourseError("corridor_half_width must be > 0")
        self._s0 = [0.0]
        self._p0 = [(self.start.x, self.start.y, self.start.heading)]
        x, y, th = self._p0[0]
        for seg in self.segments:
            x, y, th = _advance(x, y, th, seg.curvature, seg.length)
            self._s0.append(self._s0[-1] + seg.length)
            self._p0.append((x, y, th))
        self.length = self._s0[-1]
        sx, sy, sth = self._p0[0]
        self.closed = (math.hypot(x - sx, y - sy) < _JOINT_TOL
                       and abs(wrap_angle(th - sth)) < _JOINT_TOL)

    # -- arc-length queries -------------------------------------------------
    def _locate(self, s: float) -> tuple[int, float]:
        if self.closed:
            s = s % self.length
        else:
            s = min(max(s, 0.0), self.length)
        i = min(bisect.bisect_right(self._s0, s) - 1, len(self.segments) - 1)
        return i, s - self._s0[i]

    def curvature_at(self, s: float) -> float:
        i, _ = self._locate(s)
        return self.segments[i].curvature

    def command_at(self, s: float) -> str:
        i, _ = self._locate(s)
        return self.segments[i].command

    def pose_at(self, s: float, lateral: float = 0.0) -> PlanarPose:
        """Centerline pose at arc length s, optionally shifted left by ``lateral``."""
        i, ds = self._locate(s)
        x, y, th = self._p0[i]
        x, y, th = _advance(x, y, th, self.segments[i].curvature, ds)
        return PlanarPose(x - lateral * math.sin(th), y + lateral * math.cos(th), th)

    # -- projection ---------------------------------------------------------
    def project(self, x: float, y: float, hint: float | None = None) -> tuple[float, float, float]:
        """Closest centerline point: (arc length, signed left offset, tangent heading).

        ``hint`` (a nearby arc length, e.g. the previous step's) limits the
        search to that segment and its neighbours; it falls back to the full
        search when the local answer sits on a segment end or outside the
        corridor.
        """
        best = None
        if hint is not None:
            i0, _ = self._locate(hint)
            n = len(self.segments)
            near = {(i0 + d) % n if self.closed else min(max(i0 + d, 0), n - 1) for d in (-1, 0, 1)}
            for i in sorted(near):
                cand = self._project_segment(i, self.segments[i], x, y)
                if best is None or cand[0] < best[0]:
                    best = cand
            if best[4] or best[0] > self.corridor_half_width:
                best = None
        if best is None:
            for i, seg in enumerate(self.segments):
                cand = self._project_segment(i, seg, x, y)
                if best is None or cand[0] < best[0]:
                    best = cand
        _, s, lat, th, _ = best
        if self.closed:
            s = s % self.length
        return s, lat, wrap_angle(th)

    def _project_segment(self, i, seg, x, y):
        x0, y0, th0 = self._p0[i]
        s0 = self._s0[i]
        if seg.kind == "line":
            ux, uy = math.cos(th0), math.sin(th0)
            rx, ry = x - x0, y - y0
            t = min(max(rx * ux + ry * uy, 0.0), seg.length)
            px, py = x0 + t * ux, y0 + t * uy
            lat = ux * (y - py) - uy * (x - px)
            return math.hypot(x - px, y - py), s0 + t, lat, th0, t in (0.0, seg.length)
        k = seg.curvature
        rho = 1.0 / abs(k)
        cx, cy = x0 - math.sin(th0) / k, y0 + math.cos(th0) / k
        d = math.hypot(x - cx, y - cy)
        a_p = math.atan2(y - cy, x - cx)
        a_0 = math.atan2(y0 - cy, x0 - cx)
        sweep = (math.copysign(1.0, k) * (a_p - a_0)) % (2.0 * math.pi)
        t = sweep * rho
        if t <= seg.length:
            lat = math.copysign(1.0, k) * (rho - d)
            return abs(rho - d), s0 + t, lat, th0 + k * t, False
        # outside the angular range: nearest endpoint
        best = None
        for tt in (0.0, seg.length):
            px, py, th = _advance(x0, y0, th0, k, tt)
            dist = math.hypot(x - px, y - py)
            lat = math.cos(th) * (y - py) - math.sin(th) * (x - px)
            if best is None or dist < best[0]:
                best = (dist, s0 + tt, lat, th, True)
        return best

    def sample(self, spacing: float, lateral: float = 0.0) -> list[PlanarPose]:
        n = int(math.floor(self.length / spacing + 1e-9))
        return [self.pose_at(k * spacing, lateral) for k in range(n + 1)]

    def polyline(self, spacing: float = 0.5) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.sample(spacing)])

    # -- serialization ------------------------------------------------------
    def to_json(self) -> list[dict]:
        return [{"type": s.kind, "length_m": s.length, "curvature_per_m": s.curvature,
                 "command": s.command} for s in self.segments]


def course_from_json(data, id: str = "course",
                     corridor_half_width: float = DEFAULT_HALF_WIDTH) -> Course:
    """Build a course from a JSON segment list, or from an object with a ``segments`` key."""
    if isinstance(data, dict):
        id = data.get("id", id)
        corridor_half_width = data.get("corridor_half_width", corridor_half_width)
        data = data["segments"]
    try:
        segs = [Segment(d["type"], float(d["length_m"]), float(d.get("curvature_per_m", 0.0)),
                        d.get("command", "S")) for d in data]
    except (KeyError, TypeError) as e:
        raise CourseError(f"malformed segment entry: {e}") from e
    return Course(segs, id=id, corridor_half_width=corridor_half_width)


def load_course(path) -> Course:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as e:
        raise CourseError(f"cannot read course file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise CourseError(f"{path}: invalid JSON ({e})") from e
    return course_from_json(data, id=path.stem)


def save_course(course: Course, path) -> None:
    Path(path).write_text(json.dumps(course.to_json(), indent=2) + "\n")


def _bump(radius: float, angle: float) -> list[Segment]:
    """Left-right-left lane shift that returns to the original line."""
    k = 1.0 / radius
    return [arc(radius * angle, k), arc(2 * radius * angle, -k), arc(radius * angle, k)]


def _stadium(straight: float, turn_radius: float, bump_radius: float, bump_angle: float) -> list[Segment]:
    half = [line(straight), *_bump(bump_radius, bump_angle), line(straight),
            arc(math.pi * turn_radius, 1.0 / turn_radius)]
    return half + half


def benchmark_course() -> Course:
    """Closed loop with gentle curves (R >= 20 m) and a chicane on each straight."""
    return Course(_stadium(15.0, 20.0, 25.0, 0.3), id="benchmark")


def sharp_course() -> Course:
    """Held-out loop with tighter curves (R = 12 m) than the benchmark."""
    return Course(_stadium(10.0, 12.0, 12.0, 0.45), id="sharp")


def straight_course(length: float = 200.0) -> Course:
    return Course([line(length)], id="straight")


def circle_course(radius: float) -> Course:
    return Course([arc(2 * math.pi * radius, 1.0 / radius)], id=f"circle{radius:g}")
