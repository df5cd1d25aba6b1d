"""Closed-loop lane-keeping evaluation and the experiment sweeps.

An episode repeats: observe -> predict dy -> delta = atan(alpha * dy) ->
add steering perturbation -> clamp -> step the vehicle. A step is in-track
when the lateral offset from the centerline is within the corridor
half-width; past three half-widths, or once the vehicle faces more than
90 degrees away from the course direction, the episode crashes out and every
remaining step counts as out-of-track.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import qmc

from .course import Course
from .geometry import wrap_angle
from .predictor import (Corruption, OffCourse, RegressorModel, TrainConfig, observe,
                        oracle_predictor, predict_dy, train)
from .trajectory import LabelConfig, NoiseModel, Trajectory, build_dataset, corrupt
from .vehicle import (VehicleParams, VehicleState, canonical_alpha, clamp_steer, speed_lag,
                      step_dynamic, step_kinematic, steering_from_lateral)

CRASH_FACTOR = 3.0
SPIN_OUT = math.pi / 2  # heading error beyond which the vehicle has spun or turned back
EVAL_STARTS = 20


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# policies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Oracle:
    name: str = "oracle"


@dataclass(frozen=True)
class Regressor:
    model: RegressorModel = field(compare=False)
    name: str = "regressor"


@dataclass(frozen=True)
class Distilled:
    """A student regressor; identical at run time to Regressor, kept distinct for reporting."""
    model: RegressorModel = field(compare=False)
    name: str = "distilled"


Policy = Oracle | Regressor | Distilled


# ---------------------------------------------------------------------------
# episodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpisodeConfig:
    dt: float = 1.0 / 30.0
    duration: float | None = 30.0
    laps: float | None = None
    target_speed: float = 5.0
    perturbation_pct: float = 0.0
    model: Policy = Oracle()
    dynamics: str = "kinematic"
    seed: int = 0
    start_s: float = 0.0
    start_offset: float = 0.0
    start_heading: float = 0.0
    dx_nominal: float = 0.5
    vehicle: VehicleParams = VehicleParams()
    corruption: Corruption | None = None
    record_path: bool = False

    def validate(self) -> None:
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        if self.laps is None:
            if self.duration is None or self.duration < self.dt:
                raise ConfigError("duration must be at least one step (>= dt)")
        elif not self.laps > 0:
            raise ConfigError("laps must be > 0")
        if self.perturbation_pct < 0:
            raise ConfigError("perturbation_pct must be >= 0")
        if not self.target_speed > 0:
            raise ConfigError("target_speed must be > 0")
        if self.dynamics not in ("kinematic", "dynamic"):
            raise ConfigError(f"dynamics must be 'kinematic' or 'dynamic', got {self.dynamics!r}")
        if not isinstance(self.model, (Oracle, Regressor, Distilled)):
            raise ConfigError(f"unknown model {self.model!r}")

    def echo(self) -> dict:
        return {
            "dt": self.dt, "duration": self.duration, "laps": self.laps,
            "target_speed": self.target_speed, "perturbation_pct": self.perturbation_pct,
            "model": self.model.name, "dynamics": self.dynamics, "seed": self.seed,
            "start_s": self.start_s, "start_offset": self.start_offset,
            "start_heading": self.start_heading, "dx_nominal": self.dx_nominal,
            "corruption": type(self.corruption).__name__ if self.corruption else None,
        }


@dataclass(frozen=True)
class EvalReport:
    in_track_ratio: float
    mean_abs_lateral_offset: float
    max_abs_lateral_offset: float
    mean_speed: float
    steps: int
    crashed: bool
    config: dict
    path: tuple = field(default=(), compare=False, repr=False)

    def row(self) -> dict:
        return {"in_track_ratio": self.in_track_ratio,
                "mean_abs_lateral_offset": self.mean_abs_lateral_offset,
                "max_abs_lateral_offset": self.max_abs_lateral_offset,
                "mean_speed": self.mean_speed, "steps": self.steps,
                "crashed": int(self.crashed)}


def _policy_fn(course: Course, cfg: EpisodeConfig) -> Callable[[VehicleState, tuple], float]:
    if isinstance(cfg.model, Oracle):
        oracle = oracle_predictor(course, cfg.dx_nominal)
        return lambda state, proj, rng: oracle(state)
    model = cfg.model.model

    def regress(state, proj, rng):
        obs = observe(state, course, projection=proj)
        if cfg.corruption is not None:
            obs = replace(obs, features=cfg.corruption(obs.features[None, :], rng)[0])
        return predict_dy(model, obs)

    return regress


def _step_budget(course: Course, cfg: EpisodeConfig) -> int:
    if cfg.laps is not None:
        return int(math.ceil(cfg.laps * course.length / (cfg.target_speed * cfg.dt)))
    return max(1, int(round(cfg.duration / cfg.dt)))


def run_episode(course: Course, config: EpisodeConfig) -> EvalReport:
    """Drive one episode and score the fraction of steps spent inside the corridor."""
    config.validate()
    params = config.vehicle
    alpha = canonical_alpha(params, config.dx_nominal)
    policy = _policy_fn(course, config)
    rng = np.random.default_rng(config.seed)
    noise_rng = np.random.default_rng([config.seed, 1])
    step = step_dynamic if config.dynamics == "dynamic" else (
        lambda *a: step_kinematic(*a)[0])
    hw = course.corridor_half_width
    n_steps = _step_budget(course, config)

    start = course.pose_at(config.start_s, config.start_offset)
    state = VehicleState(replace(start, heading=start.heading + config.start_heading),
                         config.target_speed)
    in_track = 0
    hint = None
    offsets, speeds, path = [], [], []
    crashed = False
    for _ in range(n_steps):
        p = state.pose
        proj = course.project(p.x, p.y, hint)
        hint = proj[0]
        off = proj[1]
        if abs(off) > CRASH_FACTOR * hw or abs(wrap_angle(p.heading - proj[2])) > SPIN_OUT:
            crashed = True
            break
        offsets.append(abs(off))
        speeds.append(state.speed)
        if config.record_path:
            path.append((p.x, p.y))
        in_track += abs(off) <= hw
        try:
            dy = policy(state, proj, noise_rng)
        except OffCourse:
            crashed = True
            break
        delta = steering_from_lateral(dy, alpha)
        delta += rng.uniform(-1.0, 1.0) * config.perturbation_pct * params.max_steer
        delta = clamp_steer(delta, params)
        state = step(state, delta, speed_lag(state.speed, config.target_speed, config.dt),
                     config.dt, params)
    return EvalReport(
        in_track_ratio=in_track / n_steps,
        mean_abs_lateral_offset=float(np.mean(offsets)) if offsets else math.inf,
        max_abs_lateral_offset=float(np.max(offsets)) if offsets else math.inf,
        mean_speed=float(np.mean(speeds)) if speeds else 0.0,
        steps=n_steps,
        crashed=crashed,
        config=config.echo(),
        path=tuple(path),
    )


def eval_starts(course: Course, k: int = EVAL_STARTS, offset: float = 0.4,
                heading_jitter: float = 0.1, seed: int = 0) -> list[tuple[float, float, float]]:
    """(arc length, lateral offset, heading error) for k perturbed starts spread along the course.

    Offsets alternate in sign; heading errors are uniform in +-heading_jitter.
    """
    rng = np.random.default_rng([seed, 7])
    jit = rng.uniform(-heading_jitter, heading_jitter, size=k)
    return [(course.length * i / k, offset * (1 if i % 2 == 0 else -1), float(jit[i]))
            for i in range(k)]


def episodes_from_starts(base: EpisodeConfig, starts, seed: int) -> list[EpisodeConfig]:
    return [replace(base, start_s=s, start_offset=o, start_heading=h, seed=seed * 1000 + i)
            for i, (s, o, h) in enumerate(starts)]


def run_many(course: Course, configs: Sequence[EpisodeConfig], executor=None) -> list[EvalReport]:
    """Evaluate independent episodes, optionally through a concurrent.futures executor."""
    if executor is None:
        return [run_episode(course, c) for c in configs]
    return list(executor.map(run_episode, [course] * len(configs), configs))


def aggregate(reports: Sequence[EvalReport], **extra) -> EvalReport:
    return EvalReport(
        in_track_ratio=float(np.mean([r.in_track_ratio for r in reports])),
        mean_abs_lateral_offset=float(np.mean([r.mean_abs_lateral_offset for r in reports])),
        max_abs_lateral_offset=float(np.max([r.max_abs_lateral_offset for r in reports])),
        mean_speed=float(np.mean([r.mean_speed for r in reports])),
        steps=int(sum(r.steps for r in reports)),
        crashed=any(r.crashed for r in reports),
        config={**reports[0].config, "episodes": len(reports), **extra},
    )


# ---------------------------------------------------------------------------
# training bundles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BundleConfig:
    """How the synthetic fleet of training runs is driven."""
    offset_fraction: float = 0.8  # of the corridor half-width
    driver_preview: float | None = None  # m; None: the labelling distance
    steer_sigma: float = 0.3  # rad, driver steering disturbance
    steer_tau: float = 0.2  # s
    speed_range: tuple[float, float] = (5.0, 5.0)  # m/s; per-run speeds are drawn from this range
    retarget_every: float | None = 8.0  # m; the driver picks a new lane position this often
    retarget_range: float = 1.0  # m; new positions are uniform within +- this of the run's offset
    clean_first: bool = True  # run00 is an exact centerline run for every fleet size
    laps: float = 1.0
    dt: float = 1.0 / 30.0
    noise: NoiseModel | None = None
    seed: int = 0


def training_offsets(n: int, half_width: float, bundle: BundleConfig = BundleConfig()) -> list[float]:
    """Nested lateral offsets: the centerline first, then one seeded sequence.

    The sequence is a scrambled Sobol sequence: uniform over the offset range
    like plain random draws, but any prefix is spread evenly across it.
    Without ``clean_first`` every offset comes from the sequence.
    """
    if n < 1:
        raise ValueError("need at least one trajectory")
    m = max(6, math.ceil(math.log2(n)))
    u = qmc.Sobol(d=1, scramble=True, seed=np.random.default_rng([bundle.seed, 11])).random_base2(m)[:, 0]
    seq = (2.0 * u - 1.0) * bundle.offset_fraction * half_width
    if n == 1 or bundle.clean_first:
        return [0.0] + [float(v) for v in seq[:n - 1]]
    return [float(v) for v in seq[:n]]


def drive_trajectory(course: Course, traj_id: str, lateral: Callable[[float], float] | float = 0.0,
                     speed: float = 5.0, dt: float = 1.0 / 30.0, laps: float = 1.0,
                     dx_nominal: float = 0.5, params: VehicleParams = VehicleParams(),
                     steer_sigma: float = 0.0, steer_tau: float = 0.5, seed: int = 0,
                     preview: float | None = None) -> Trajectory:
    """Record the oracle controller tracking a (possibly varying) lateral offset profile.

    ``steer_sigma`` adds a slowly varying steering disturbance (stationary
    std in radians, correlation time ``steer_tau``) standing in for an
    imperfect human driver. ``preview`` is the driver's look-ahead distance
    (defaults to ``dx_nominal``); longer previews give softer tracking.
    """
    lat = lateral if callable(lateral) else (lambda s, o=float(lateral): o)
    preview = dx_nominal if preview is None else preview
    oracle = oracle_predictor(course, preview, lat)
    alpha = canonical_alpha(params, preview)
    state = VehicleState(course.pose_at(0.0, lat(0.0)), speed)
    n = int(math.ceil(laps * course.length / (speed * dt)))
    rng = np.random.default_rng(seed)
    decay = math.exp(-dt / steer_tau)
    kick = steer_sigma * math.sqrt(1.0 - decay * decay)
    disturbance = 0.0
    poses = [state.pose]
    for _ in range(n):
        disturbance = decay * disturbance + kick * rng.standard_normal()
        delta = clamp_steer(steering_from_lateral(oracle(state), alpha) + disturbance, params)
        state, _ = step_kinematic(state, delta, speed, dt, params)
        poses.append(state.pose)
    return Trajectory(traj_id, np.arange(n + 1) * dt, poses)


def centerline_trajectory(course: Course, traj_id: str, speed: float = 5.0, dt: float = 1.0 / 30.0,
                          laps: float = 1.0) -> Trajectory:
    """Poses sampled exactly on the centerline at constant speed."""
    n = int(math.ceil(laps * course.length / (speed * dt)))
    return Trajectory(traj_id, np.arange(n + 1) * dt, [course.pose_at(k * speed * dt) for k in range(n + 1)])


def _retargeting(offset: float, bundle: BundleConfig, course: Course, i: int) -> Callable[[float], float]:
    """Piecewise-constant lane position: each jump makes the driver recover like the controller would."""
    n = int(math.ceil(bundle.laps * course.length / bundle.retarget_every)) + 1
    jumps = np.random.default_rng([bundle.seed, 19, i]).uniform(-1.0, 1.0, n) * bundle.retarget_range
    jumps[0] = 0.0
    bound = bundle.offset_fraction * course.corridor_half_width
    targets = np.clip(offset + jumps, -bound, bound)
    return lambda s: float(targets[min(int(s // bundle.retarget_every), n - 1)])


def make_trajectories(course: Course, n: int, bundle: BundleConfig = BundleConfig(),
                      dx_nominal: float = 0.5, params: VehicleParams = VehicleParams()) -> list[Trajectory]:
    """n runs of the course by an imperfect driver, starting with an exact centerline run.

    Besides its base offset, each driven run keeps moving to new lane positions
    (``retarget_every``), so the fleet contains the large heading errors of
    recoveries and not only steady tracking.
    """
    offsets = training_offsets(n, course.corridor_half_width, bundle)
    if n == 1:
        return [centerline_trajectory(course, "run00", 0.5 * sum(bundle.speed_range), bundle.dt, bundle.laps)]
    speeds = np.random.default_rng([bundle.seed, 13]).uniform(*bundle.speed_range, size=max(n, 64))
    out = []
    for i, o in enumerate(offsets):
        if i == 0 and bundle.clean_first:
            t = centerline_trajectory(course, "run00", float(speeds[0]), bundle.dt, bundle.laps)
        else:
            lateral = o if bundle.retarget_every is None else _retargeting(o, bundle, course, i)
            t = drive_trajectory(course, f"run{i:02d}", lateral, float(speeds[i]), bundle.dt, bundle.laps,
                                 dx_nominal, params, bundle.steer_sigma, bundle.steer_tau,
                                 seed=bundle.seed * 1000 + i, preview=bundle.driver_preview)
        if bundle.noise is not None:
            t = corrupt(t, replace(bundle.noise, seed=bundle.noise.seed + i))
        out.append(t)
    return out


def default_train_config(n_samples: int, seed: int = 0, steps: int = 12000,
                         learning_rate: float = 1e-3, batch_size: int = 64) -> TrainConfig:
    """Epoch count that gives roughly ``steps`` optimiser updates whatever the dataset size."""
    per_epoch = max(1, math.ceil(n_samples / batch_size))
    return TrainConfig(learning_rate=learning_rate, batch_size=batch_size,
                       epochs=max(1, math.ceil(steps / per_epoch)), seed=seed)


def train_on_course(course: Course, n: int, bundle: BundleConfig = BundleConfig(),
                    label: LabelConfig = LabelConfig(), train_config: TrainConfig | None = None,
                    trajectories: Sequence[Trajectory] | None = None) -> RegressorModel:
    trajs = list(trajectories) if trajectories is not None else make_trajectories(
        course, n, bundle, label.dx_nominal, label.vehicle)
    data = build_dataset(trajs, course, label)
    cfg = (replace(train_config, seed=bundle.seed) if train_config is not None
           else default_train_config(len(data), seed=bundle.seed))
    return train(data, cfg)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    episode: EpisodeConfig = EpisodeConfig(duration=None, laps=1.0)
    bundle: BundleConfig = BundleConfig()
    label: LabelConfig = LabelConfig()
    train: TrainConfig | None = None
    starts: int = EVAL_STARTS
    start_offset: float = 0.4
    heading_jitter: float = 0.1
    repeats: int = 10
    train_repeats: int = 3  # independently seeded training fleets per trajectory count
    speed_duration: float = 30.0  # seconds; speed sweeps score time in track, not laps
    seed: int = 0


@dataclass
class SweepResult:
    name: str
    keys: tuple[str, ...]
    rows: list[dict]
    failures: list[dict] = field(default_factory=list)

    def summary(self) -> list[dict]:
        """Mean and population std of in_track_ratio per key combination."""
        groups: dict[tuple, list[float]] = {}
        for r in self.rows:
            groups.setdefault(tuple(r[k] for k in self.keys), []).append(r["in_track_ratio"])
        out = []
        for key in sorted(groups, key=_sort_key):
            v = np.array(groups[key])
            out.append({**dict(zip(self.keys, key)), "mean": float(v.mean()),
                        "std": float(v.std()), "n": len(v)})
        return out

    def mean(self, **key) -> float:
        return next(s["mean"] for s in self.summary() if all(s[k] == v for k, v in key.items()))

    def std(self, **key) -> float:
        return next(s["std"] for s in self.summary() if all(s[k] == v for k, v in key.items()))

    def to_csv(self) -> str:
        return _rows_csv(self.rows, [*self.keys, "fleet_seed", "repeat"])

    def summary_csv(self) -> str:
        return _rows_csv(self.summary(), list(self.keys))


def _sort_key(key):
    return tuple((0, v, "") if isinstance(v, (int, float)) else (1, 0, str(v)) for v in key)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _rows_csv(rows: list[dict], order: list[str]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    cols = [c for c in order if c in rows[0]] + [c for c in rows[0] if c not in order]
    rows = sorted(rows, key=lambda r: _sort_key(tuple(r[c] for c in order if c in r)))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def _starts(course: Course, cfg: SweepConfig, k: int):
    return eval_starts(course, k, cfg.start_offset, cfg.heading_jitter, cfg.seed)


def sweep_trajectories(counts: Iterable[int], course: Course, config: SweepConfig = SweepConfig(),
                       executor=None) -> SweepResult:
    """Mean in-track ratio as a function of the number of training runs.

    Each count is trained ``config.train_repeats`` times on fleets seeded
    ``seed, seed + 1, ...``; every model is evaluated from the same starts.
    """
    counts = list(counts)
    if any(n < 1 for n in counts):
        raise ConfigError("trajectory counts must be >= 1")
    if config.train_repeats < 1:
        raise ConfigError("train_repeats must be >= 1")
    rows, failures = [], []
    starts = _starts(course, config, config.starts)
    for n in counts:
        for r in range(config.train_repeats):
            fleet_seed = config.seed + r
            try:
                model = train_on_course(course, n, replace(config.bundle, seed=fleet_seed),
                                        config.label, config.train)
            except Exception as e:  # recorded, the sweep continues
                failures.append({"n_traj": n, "fleet_seed": fleet_seed,
                                 "error": f"{type(e).__name__}: {e}"})
                continue
            base = replace(config.episode, model=Regressor(model, f"{n}-traj"))
            cfgs = episodes_from_starts(base, starts, config.seed)
            for i, rep in enumerate(run_many(course, cfgs, executor)):
                rows.append({"n_traj": n, "fleet_seed": fleet_seed, "repeat": i, **rep.row()})
    return SweepResult("trajectories", ("n_traj",), rows, failures)


def sweep_perturbation(levels: Iterable[float], models: dict[str, Policy], course: Course,
                       config: SweepConfig = SweepConfig(), executor=None) -> SweepResult:
    """In-track ratio per (model, perturbation level) over seeded repeats."""
    levels = list(levels)
    if any(not 0 <= lv <= 0.5 for lv in levels):
        raise ConfigError("perturbation levels must lie in [0, 0.5]")
    starts = _starts(course, config, config.repeats)
    rows = []
    for name, policy in models.items():
        for lv in levels:
            base = replace(config.episode, model=policy, perturbation_pct=lv)
            cfgs = episodes_from_starts(base, starts, config.seed)
            for i, rep in enumerate(run_many(course, cfgs, executor)):
                rows.append({"model": name, "level": lv, "repeat": i, **rep.row()})
    return SweepResult("perturbation", ("model", "level"), rows)


def sweep_speed(speeds: Iterable[float], models: dict[str, Policy], course: Course,
                config: SweepConfig = SweepConfig(), dynamics: str = "dynamic",
                executor=None) -> SweepResult:
    """In-track ratio and realised mean speed per target speed with the slip model active.

    Episodes run for a fixed time rather than a lap, so a faster car that
    leaves the track after the same distance scores lower, not higher.
    """
    speeds = list(speeds)
    if any(not v > 0 for v in speeds):
        raise ConfigError("speeds must be > 0")
    starts = _starts(course, config, config.repeats)
    rows = []
    for name, policy in models.items():
        for v in speeds:
            base = replace(config.episode, model=policy, target_speed=v, dynamics=dynamics,
                           duration=config.speed_duration, laps=None)
            cfgs = episodes_from_starts(base, starts, config.seed)
            for i, rep in enumerate(run_many(course, cfgs, executor)):
                rows.append({"model": name, "speed": v, "repeat": i, **rep.row()})
    return SweepResult("speed", ("model", "speed"), rows)


def eval_heldout(train_course: Course, test_course: Course, config: SweepConfig = SweepConfig(),
                 n_traj: int = 8, policy: Policy | None = None, executor=None) -> EvalReport:
    """Train on one course, evaluate on another from perturbed starts."""
    if train_course.id == test_course.id:
        raise ConfigError("held-out evaluation needs distinct course ids")
    if policy is None:
        model = train_on_course(train_course, n_traj, replace(config.bundle, seed=config.seed),
                                config.label, config.train)
        policy = Regressor(model, f"{n_traj}-traj")
    base = replace(config.episode, model=policy)
    cfgs = episodes_from_starts(base, _starts(test_course, config, config.starts), config.seed)
    return aggregate(run_many(test_course, cfgs, executor), heldout=True,
                     train_course=train_course.id, test_course=test_course.id)


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {k: _jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def write_manifest(out_dir, config: dict, seeds: dict | None = None) -> Path:
    path = Path(out_dir) / "manifest.json"
    doc = {"config": _jsonable(config), "seeds": _jsonable(seeds or {})}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def reports_csv(reports: Sequence[EvalReport], keys: Sequence[str] = ("model", "seed")) -> str:
    rows = [{**{k: r.config.get(k) for k in keys}, "repeat": i, **r.row()}
            for i, r in enumerate(reports)]
    return _rows_csv(rows, [*keys, "repeat"])


def svg(course: Course, paths: dict[str, Sequence[tuple[float, float]]] = None,
        width: int = 800, margin: float = 5.0) -> str:
    """Course centerline plus driven paths as an SVG document (y axis up)."""
    center = course.polyline(0.5)
    pts = [center] + [np.asarray(p) for p in (paths or {}).values() if len(p)]
    allp = np.vstack(pts)
    lo = allp.min(axis=0) - margin
    hi = allp.max(axis=0) + margin
    scale = width / (hi[0] - lo[0])
    height = int(math.ceil((hi[1] - lo[1]) * scale))

    def poly(p, color, w):
        q = " ".join(f"{(x - lo[0]) * scale:.2f},{(hi[1] - y) * scale:.2f}" for x, y in p)
        return f'<polyline points="{q}" fill="none" stroke="{color}" stroke-width="{w}"/>'

    colors = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             poly(center, "#999999", 2)]
    for i, (name, p) in enumerate((paths or {}).items()):
        if len(p):
            lines.append(f"<!-- {name} -->")
            lines.append(poly(p, colors[i % len(colors)], 1))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
