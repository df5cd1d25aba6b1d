"""Trajectories and the self-supervised labelling pipeline.

A label is the lateral component ``dy`` of the vector from the current
frame to a pose roughly ``dx`` ahead, expressed in the frame of the
previous displacement. With several runs of the same route, every run is
relabelled against the centermost one (the reference).
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .course import Course
from .geometry import (EPS_ZERO, PlanarPose, PlanarVec, RelativeMotion, local_motion, quaternion_from_yaw,
                       wrap_angle, yaw_from_quaternion)
from .predictor import ObservationVector, observe
from .vehicle import VehicleParams, VehicleState, canonical_alpha, steering_from_lateral

ROUTE_MATCH_THRESHOLD = 5.0
VIOLATION_BUDGET = 0.10
FORWARD_WINDOW = (0.5, 1.5)


class ParseError(ValueError):
    pass


class NonMonotonicTimestamps(ValueError):
    pass


class IncompatibleRoutes(ValueError):
    pass


class Provenance(enum.Enum):
    GROUND_TRUTH = "GroundTruth"
    NOISY_VO = "NoisyVO"
    FILE = "File"


@dataclass(frozen=True)
class Trajectory:
    id: str
    timestamps: np.ndarray
    poses: tuple[PlanarPose, ...]
    provenance: Provenance = Provenance.GROUND_TRUTH

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "poses", tuple(self.poses))
        if len(self.poses) < 2 or len(ts) != len(self.poses):
            raise ValueError("a trajectory needs >= 2 frames with one timestamp each")
        if not np.all(np.isfinite(ts)):
            raise ValueError("timestamps must be finite")
        bad = np.nonzero(np.diff(ts) <= 0)[0]
        if len(bad):
            raise NonMonotonicTimestamps(f"{self.id}: timestamp at frame {bad[0] + 1} does not increase")

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def xy(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.poses])

    @property
    def headings(self) -> np.ndarray:
        return np.array([p.heading for p in self.poses])

    def speed_at(self, i: int) -> float:
        """Finite-difference speed into frame i (out of frame 0 for the first).

        The chord between frames is stretched to the length of the circular
        arc implied by the heading change, so turning does not read as slowing.
        """
        j, k = (i - 1, i) if i > 0 else (0, 1)
        p, q = self.poses[j], self.poses[k]
        half = 0.5 * abs(wrap_angle(q.heading - p.heading))
        stretch = half / math.sin(half) if half > 1e-8 else 1.0
        return stretch * math.hypot(q.x - p.x, q.y - p.y) / (self.timestamps[k] - self.timestamps[j])

    def transformed(self, T: PlanarPose) -> Trajectory:
        """The same run seen from a rigidly moved world frame."""
        return Trajectory(self.id, self.timestamps, [T.compose(p) for p in self.poses], self.provenance)


# ---------------------------------------------------------------------------
# TUM files
# ---------------------------------------------------------------------------

def parse_tum(text: str, id: str = "traj", source: str = "<string>") -> Trajectory:
    ts, poses = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 8:
            raise ParseError(f"{source}:{lineno}: expected 8 fields "
                             f"'timestamp tx ty tz qx qy qz qw', got {len(fields)}")
        try:
            t, tx, ty, _tz, qx, qy, qz, qw = (float(f) for f in fields)
        except ValueError as e:
            raise ParseError(f"{source}:{lineno}: {e}") from e
        if not all(math.isfinite(v) for v in (t, tx, ty, qx, qy, qz, qw)):
            raise ParseError(f"{source}:{lineno}: non-finite value")
        if ts and t <= ts[-1]:
            raise NonMonotonicTimestamps(f"{source}:{lineno}: timestamp {t} does not increase")
        ts.append(t)
        poses.append(PlanarPose(tx, ty, yaw_from_quaternion(qx, qy, qz, qw)))
    if len(poses) < 2:
        raise ParseError(f"{source}: need at least 2 poses, found {len(poses)}")
    return Trajectory(id, np.array(ts), poses, Provenance.FILE)


def load_tum(path) -> Trajectory:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(f"cannot read pose file {path}: {e}") from e
    return parse_tum(text, id=path.stem, source=str(path))


def format_tum(traj: Trajectory) -> str:
    buf = io.StringIO()
    for t, p in zip(traj.timestamps, traj.poses):
        qx, qy, qz, qw = quaternion_from_yaw(p.heading)
        buf.write(f"{t:.6f} {p.x:.9f} {p.y:.9f} 0.000000000 "
                  f"{qx:.9f} {qy:.9f} {qz:.9f} {qw:.9f}\n")
    return buf.getvalue()


def save_tum(traj: Trajectory, path) -> None:
    Path(path).write_text(format_tum(traj))


# ---------------------------------------------------------------------------
# synthetic visual-odometry error
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseModel:
    translation_sigma: float = 0.0  # m per step
    heading_sigma: float = 0.0  # rad per step
    drift_rate: float = 0.0  # lateral drift, m per m travelled
    seed: int = 0

    def __post_init__(self):
        if self.translation_sigma < 0 or self.heading_sigma < 0:
            raise ValueError("noise sigmas must be >= 0")


def corrupt(traj: Trajectory, noise: NoiseModel) -> Trajectory:
    """Perturb each inter-frame motion, then chain the perturbed motions again."""
    rng = np.random.default_rng(noise.seed)
    n = len(traj) - 1
    e_t = rng.normal(size=(n, 2)) * noise.translation_sigma
    e_h = rng.normal(size=n) * noise.heading_sigma
    poses = [traj.poses[0]]
    for k in range(n):
        a, b = traj.poses[k], traj.poses[k + 1]
        c, s = math.cos(a.heading), math.sin(a.heading)
        ddx, ddy = b.x - a.x, b.y - a.y
        fx, fy = c * ddx + s * ddy, -s * ddx + c * ddy  # motion in frame a
        fx += e_t[k, 0]
        fy += e_t[k, 1] + noise.drift_rate * math.hypot(ddx, ddy)
        rel = PlanarPose(fx, fy, b.heading - a.heading + e_h[k])
        poses.append(poses[-1].compose(rel))
    return Trajectory(traj.id, traj.timestamps, poses, Provenance.NOISY_VO)


# ---------------------------------------------------------------------------
# pairing, reference selection, relabelling
# ---------------------------------------------------------------------------

def pair_frames(traj: Trajectory, dx_nominal: float, tol: float = 0.1) -> list[tuple[int, int]]:
    """Greedy chain of frame pairs whose planar separation is dx_nominal within ``tol``.

    A frame that overshoots the band without any frame landing inside it
    restarts the chain from that frame.
    """
    if not dx_nominal > 0 or not 0 <= tol < 1:
        raise ValueError("need dx_nominal > 0 and 0 <= tol < 1")
    return _pair_chain(traj.xy, 0, dx_nominal * (1 - tol), dx_nominal * (1 + tol))


def _pair_chain(xy: np.ndarray, start: int, lo: float, hi: float) -> list[tuple[int, int]]:
    pairs = []
    anchor = start
    for j in range(start + 1, len(xy)):
        d = math.hypot(xy[j, 0] - xy[anchor, 0], xy[j, 1] - xy[anchor, 1])
        if d < lo:
            continue
        if d <= hi:
            pairs.append((anchor, j))
        anchor = j
    return pairs


def _next_in_band(xy: np.ndarray, start: int, lo: float, hi: float) -> int | None:
    for j in range(start + 1, len(xy)):
        d = math.hypot(xy[j, 0] - xy[start, 0], xy[j, 1] - xy[start, 1])
        if d < lo:
            continue
        return j if d <= hi else None
    return None


def _nearest(ref_xy: np.ndarray, query_xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dist, idx = cKDTree(ref_xy).query(query_xy)
    return dist, idx


def _check_route_match(dist: np.ndarray, a: str, b: str, threshold: float) -> None:
    frac = float(np.mean(dist > threshold)) if len(dist) else 0.0
    if frac > VIOLATION_BUDGET:
        raise IncompatibleRoutes(f"{a} vs {b}: {frac:.0%} of frames are more than "
                                 f"{threshold} m from the other route")


def lateral_offsets(query: Trajectory, other: Trajectory,
                    threshold: float = ROUTE_MATCH_THRESHOLD) -> np.ndarray:
    """Per-frame lateral component of the displacement to the nearest frame of ``other``,
    in the local frame of each ``query`` pose (left-positive)."""
    q = query.xy
    dist, idx = _nearest(other.xy, q)
    _check_route_match(dist, query.id, other.id, threshold)
    d = other.xy[idx] - q
    h = query.headings
    return -np.sin(h) * d[:, 0] + np.cos(h) * d[:, 1]


def select_reference(trajs: Sequence[Trajectory], threshold: float = ROUTE_MATCH_THRESHOLD,
                     tie_tol: float = 0.01) -> str:
    """Id of the centermost run: the lowest sum of mean |lateral offset| to all others.

    Scores within ``tie_tol`` (relative) of the best count as tied; ties go
    to the lowest id. With two runs the scores are equal up to sampling.
    """
    if len(trajs) < 2:
        raise ValueError("reference selection needs at least 2 trajectories")
    ids = [t.id for t in trajs]
    if len(set(ids)) != len(ids):
        raise ValueError("trajectory ids must be unique")
    scores = {}
    for a in trajs:
        scores[a.id] = sum(float(np.mean(np.abs(lateral_offsets(a, b, threshold))))
                           for b in trajs if b is not a)
    best = min(scores.values())
    return min(k for k, v in scores.items() if v <= best * (1.0 + tie_tol) + EPS_ZERO)


def relabel(traj: Trajectory, reference: Trajectory, dx_nominal: float, tol: float = 0.1,
            threshold: float = ROUTE_MATCH_THRESHOLD) -> list[tuple[int, RelativeMotion]]:
    """Local-frame motion from frames of ``traj`` towards the reference pose ~dx ahead.

    Frames are the anchors of ``traj``'s own pairing chain; the direction of
    travel V_t is the displacement from the previous anchor. The target is
    the reference frame ~dx_nominal along the reference from the reference
    frame nearest to the current one, kept only if its forward projection
    lies within FORWARD_WINDOW * dx_nominal. With ``reference is traj`` this
    reproduces the single-run labels of the pairing chain.
    """
    lo, hi = dx_nominal * (1 - tol), dx_nominal * (1 + tol)
    pairs = pair_frames(traj, dx_nominal, tol)
    xy, rxy = traj.xy, reference.xy
    anchors = [(pairs[k - 1][0], pairs[k][0]) for k in range(1, len(pairs))
               if pairs[k - 1][1] == pairs[k][0]]
    if not anchors:
        return []
    frames = np.array([f for _, f in anchors])
    if reference is traj or reference.id == traj.id:
        foot = frames  # a run is its own nearest neighbour
    else:
        dist, foot = _nearest(rxy, xy[frames])
        _check_route_match(dist, traj.id, reference.id, threshold)
    out = []
    w_lo, w_hi = FORWARD_WINDOW[0] * dx_nominal, FORWARD_WINDOW[1] * dx_nominal
    for (prev, f), k in zip(anchors, foot):
        j = _next_in_band(rxy, int(k), lo, hi)
        if j is None:
            continue
        v_prev = PlanarVec(xy[f, 0] - xy[prev, 0], xy[f, 1] - xy[prev, 1])
        v_next = PlanarVec(rxy[j, 0] - xy[f, 0], rxy[j, 1] - xy[f, 1])
        proj = (v_prev.vx * v_next.vx + v_prev.vy * v_next.vy) / v_prev.norm
        if not w_lo <= proj <= w_hi:
            continue
        out.append((f, local_motion(v_prev, v_next)))
    return out


# ---------------------------------------------------------------------------
# dataset
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelConfig:
    dx_nominal: float = 0.5
    tol: float = 0.1
    vehicle: VehicleParams = VehicleParams()
    route_threshold: float = ROUTE_MATCH_THRESHOLD

    def __post_init__(self):
        if not self.dx_nominal > 0:
            raise ValueError("dx_nominal must be > 0")
        if not 0 <= self.tol < 1:
            raise ValueError("tol must be in [0, 1)")

    @property
    def alpha(self) -> float:
        return canonical_alpha(self.vehicle, self.dx_nominal)


@dataclass(frozen=True)
class LabeledSample:
    traj_id: str
    frame: int
    observation: ObservationVector
    command: str
    motion: RelativeMotion
    steer_label: float


def build_dataset(trajs: Sequence[Trajectory], course: Course,
                  config: LabelConfig = LabelConfig()) -> list[LabeledSample]:
    """Pair, relabel against the reference run, and attach observations and commands.

    Samples whose local forward distance falls outside the pairing band are
    dropped so every emitted label has dx within dx_nominal * (1 +- tol).
    """
    if not trajs:
        raise ValueError("need at least one trajectory")
    ordered = sorted(trajs, key=lambda t: t.id)
    if len(ordered) == 1:
        reference = ordered[0]
    else:
        ref_id = select_reference(ordered, config.route_threshold)
        reference = next(t for t in ordered if t.id == ref_id)
    lo, hi = config.dx_nominal * (1 - config.tol), config.dx_nominal * (1 + config.tol)
    alpha = config.alpha
    out = []
    for traj in ordered:
        ref = traj if traj.id == reference.id else reference
        for f, motion in relabel(traj, ref, config.dx_nominal, config.tol, config.route_threshold):
            if not lo <= motion.dx <= hi:
                continue
            pose = traj.poses[f]
            s, _, _ = course.project(pose.x, pose.y)
            cmd = course.command_at(s)
            obs = observe(VehicleState(pose, traj.speed_at(f)), course, cmd,
                          threshold=config.route_threshold)
            out.append(LabeledSample(traj.id, f, obs, cmd, motion,
                                     steering_from_lateral(motion.dy, alpha, config.vehicle)))
    return out


DATASET_HEADER = ("frame", "traj_id", "dx", "dy", "steer", "command")


def format_dataset_csv(samples: Sequence[LabeledSample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DATASET_HEADER)
    for s in samples:
        w.writerow([s.frame, s.traj_id, f"{s.motion.dx:.9g}", f"{s.motion.dy:.9g}",
                    f"{s.steer_label:.9g}", s.command])
    return buf.getvalue()


def format_observations_csv(samples: Sequence[LabeledSample]) -> str:
    """Companion to the dataset CSV: observation features per row, full precision."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if not samples:
        w.writerow(["frame", "traj_id"])
        return buf.getvalue()
    n = len(samples[0].observation.features)
    w.writerow(["frame", "traj_id", *(f"f{i}" for i in range(n)), "cmd_L", "cmd_S", "cmd_R"])
    for s in samples:
        w.writerow([s.frame, s.traj_id, *(repr(float(v)) for v in s.observation.features),
                    *(repr(float(v)) for v in s.observation.command)])
    return buf.getvalue()


def read_training_csvs(dataset_path, observations_path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Load (features, commands, dy) written by ``format_dataset_csv``/``format_observations_csv``."""
    with open(dataset_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    with open(observations_path, newline="") as fh:
        obs = list(csv.reader(fh))[1:]
    if len(rows) != len(obs):
        raise ValueError(f"{dataset_path} and {observations_path} have different row counts")
    for r, o in zip(rows, obs):
        if (r["frame"], r["traj_id"]) != (o[0], o[1]):
            raise ValueError(f"row mismatch between dataset and observations at frame {r['frame']}")
    arr = np.array([[float(v) for v in o[2:]] for o in obs]) if obs else np.zeros((0, 19))
    t = np.array([float(r["dy"]) for r in rows])
    return arr[:, :-3], arr[:, -3:], t
