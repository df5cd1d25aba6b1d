"""Batch front-end: generate -> label -> train -> distill -> eval / sweep.

Every command takes a JSON config (``--config``); ``--seed``, ``--out`` and
``--set key.path=value`` override keys in it. Each output directory gets a
manifest.json recording the effective config and input file hashes.

Exit codes: 0 success, 2 invalid config or inputs, 3 pipeline failure.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import harness as H
from .course import Course, CourseError, benchmark_course, load_course, sharp_course, straight_course
from .predictor import (AffineDistortion, FeatureDropout, GaussianNoise, IdentityCorruption,
                        TrainConfig, distill_arrays, load_model, save_model, train_arrays,
                        write_loss_csv)
from .trajectory import (LabelConfig, NoiseModel, NonMonotonicTimestamps, ParseError, build_dataset,
                         corrupt, format_dataset_csv, format_observations_csv, load_tum,
                         read_training_csvs, save_tum)
from .vehicle import VehicleParams

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3
SWEEPS = ("trajectories", "perturbation", "speed", "heldout")
PRESETS = {"single-trajectory": {"generate": {"n_traj": 1}},
           "multi-trajectory": {"generate": {"n_traj": 8}}}
COURSES = {"benchmark": benchmark_course, "sharp": sharp_course, "straight": straight_course}
CORRUPTIONS = {"identity": IdentityCorruption, "gaussian": GaussianNoise,
               "affine": AffineDistortion, "dropout": FeatureDropout}

DEFAULTS = {
    "seed": 0,
    "out": "out",
    "course": "benchmark",
    "dx_nominal": 0.5,
    "tol": 0.1,
    "vehicle": {},
    "noise": None,
    "generate": {"n_traj": 3},
    "trajectories": None,
    "dataset": None,
    "model": None,
    "train": {"learning_rate": 1e-3, "epochs": 200, "batch_size": 64},
    "distill": {"corruption": {"kind": "gaussian", "sigma": 0.2}},
    "eval": {"policy": "oracle", "duration": 30.0, "starts": 1, "start_offset": 0.0,
             "heading_jitter": 0.0},
    "sweep": {},
}


class ValidationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _set_path(cfg: dict, assignment: str) -> None:
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ValidationError(f"--set expects key=value, got {assignment!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    *parents, leaf = key.split(".")
    for p in parents:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ValidationError(f"--set {key}: {p!r} is not an object")
    node[leaf] = value


def load_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        path = Path(args.config)
        try:
            user = json.loads(path.read_text())
        except OSError as e:
            raise ValidationError(f"cannot read config {path}: {e.strerror}") from e
        except json.JSONDecodeError as e:
            raise ValidationError(f"{path}: invalid JSON ({e})") from e
        if not isinstance(user, dict):
            raise ValidationError(f"{path}: top level must be an object")
        unknown = set(user) - set(DEFAULTS) - {"preset"}
        if unknown:
            raise ValidationError(f"{path}: unknown keys {sorted(unknown)}")
        preset = user.pop("preset", None)
        if preset is not None:
            if preset not in PRESETS:
                raise ValidationError(f"unknown preset {preset!r}; valid: {sorted(PRESETS)}")
            cfg = _merge(cfg, PRESETS[preset])
        cfg = _merge(cfg, user)
    for assignment in args.set or ():
        _set_path(cfg, assignment)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    if not isinstance(cfg["seed"], int):
        raise ValidationError("seed must be an integer")
    if not (isinstance(cfg["dx_nominal"], (int, float)) and cfg["dx_nominal"] > 0):
        raise ValidationError("dx_nominal must be > 0")
    if not (isinstance(cfg["tol"], (int, float)) and 0 < cfg["tol"] < 1):
        raise ValidationError("tol must lie in (0, 1)")
    return cfg


def _build(cls, params: dict | None, what: str, **extra):
    params = dict(params or {})
    names = {f.name for f in fields(cls)}
    unknown = set(params) - names
    if unknown:
        raise ValidationError(f"{what}: unknown keys {sorted(unknown)}")
    params.update(extra)
    try:
        return cls(**params)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{what}: {e}") from e


def _course(spec) -> Course:
    if isinstance(spec, str) and spec in COURSES:
        return COURSES[spec]()
    try:
        return load_course(_existing(spec, "course"))
    except CourseError as e:
        raise ValidationError(str(e)) from e


def _existing(path, what: str) -> Path:
    if path is None:
        raise ValidationError(f"config key {what!r} is required for this command")
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"{what}: {p} does not exist")
    return p


def _vehicle(cfg) -> VehicleParams:
    return _build(VehicleParams, cfg["vehicle"], "vehicle")


def _label_config(cfg) -> LabelConfig:
    return LabelConfig(dx_nominal=float(cfg["dx_nominal"]), tol=float(cfg["tol"]), vehicle=_vehicle(cfg))


def _train_config(cfg, section: str = "train") -> TrainConfig:
    return _build(TrainConfig, cfg[section], section, seed=cfg["seed"])


def _corruption(spec: dict):
    spec = dict(spec or {"kind": "identity"})
    kind = spec.pop("kind", None)
    if kind not in CORRUPTIONS:
        raise ValidationError(f"corruption kind must be one of {sorted(CORRUPTIONS)}, got {kind!r}")
    return _build(CORRUPTIONS[kind], spec, f"corruption {kind}")


def _out_dir(cfg) -> Path:
    out = Path(cfg["out"])
    if out.exists() and not out.is_dir():
        raise ValidationError(f"output path {out} exists and is not a directory")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ValidationError(f"cannot create output directory {out}: {e.strerror}") from e
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest(out: Path, command: str, cfg: dict, inputs=(), outputs=()) -> None:
    config = {k: v for k, v in cfg.items() if k != "out"}
    doc = {"command": command, "config": config,
           "inputs": {p.name: _sha256(p) for p in sorted(inputs)},
           "outputs": sorted(outputs)}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write(out: Path, name: str, text: str) -> str:
    (out / name).write_text(text)
    return name


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate(cfg: dict) -> Path:
    """Drive the oracle at offset variants and write TUM trajectories."""
    course = _course(cfg["course"])
    gen = dict(cfg["generate"])
    n = gen.pop("n_traj", 1)
    if not isinstance(n, int) or n < 1:
        raise ValidationError("generate.n_traj must be a positive integer")
    bundle = _build(H.BundleConfig, gen, "generate", seed=cfg["seed"])
    noise = None
    if cfg["noise"] is not None:
        noise = _build(NoiseModel, cfg["noise"], "noise", seed=cfg["seed"])
    params = _vehicle(cfg)
    out = _out_dir(cfg)
    trajs = H.make_trajectories(course, n, bundle, float(cfg["dx_nominal"]), params)
    written = []
    for i, t in enumerate(trajs):
        if noise is not None:
            t = corrupt(t, replace(noise, seed=noise.seed * 1000 + i))
        save_tum(t, out / f"{t.id}.tum")
        written.append(f"{t.id}.tum")
    written.append(_write(out, "course.json", json.dumps(course.to_json(), indent=2) + "\n"))
    _manifest(out, "generate", cfg, outputs=written)
    return out


def _trajectory_paths(spec) -> list[Path]:
    if spec is None:
        raise ValidationError("config key 'trajectories' is required for this command")
    if isinstance(spec, str):
        p = _existing(spec, "trajectories")
        paths = sorted(p.glob("*.tum")) if p.is_dir() else [p]
    else:
        paths = [_existing(s, "trajectories") for s in spec]
    if not paths:
        raise ValidationError(f"no .tum files found in {spec}")
    return paths


def cmd_label(cfg: dict) -> Path:
    """Pair, relabel and write the dataset CSV plus its observation table."""
    course = _course(cfg["course"])
    paths = _trajectory_paths(cfg["trajectories"])
    trajs = []
    for p in paths:
        try:
            trajs.append(load_tum(p))
        except (ParseError, NonMonotonicTimestamps) as e:
            raise ValidationError(f"{p}: {e}") from e
    label = _label_config(cfg)
    out = _out_dir(cfg)
    samples = build_dataset(trajs, course, label)
    written = [_write(out, "dataset.csv", format_dataset_csv(samples)),
               _write(out, "observations.csv", format_observations_csv(samples))]
    _manifest(out, "label", cfg, inputs=paths, outputs=written)
    return out


def _dataset_files(cfg) -> tuple[Path, Path]:
    d = _existing(cfg["dataset"], "dataset")
    ds, obs = d / "dataset.csv", d / "observations.csv"
    for p in (ds, obs):
        if not p.exists():
            raise ValidationError(f"dataset: {p} does not exist")
    return ds, obs


def cmd_train(cfg: dict) -> Path:
    ds, obs = _dataset_files(cfg)
    tc = _train_config(cfg)
    out = _out_dir(cfg)
    X, C, t = read_training_csvs(ds, obs)
    model = train_arrays(X, C, t, tc)
    save_model(model, out / "model.json")
    write_loss_csv(model.history, out / "loss.csv")
    _manifest(out, "train", cfg, inputs=[ds, obs], outputs=["loss.csv", "model.json"])
    return out


def cmd_distill(cfg: dict) -> Path:
    """Train a student feature extractor under corruption; the head is copied from the teacher."""
    ds, obs = _dataset_files(cfg)
    model_path = _existing(cfg["model"], "model")
    corruption = _corruption(cfg["distill"].get("corruption"))
    extra = {k: v for k, v in cfg["distill"].items() if k != "corruption"}
    tc = _build(TrainConfig, _merge(cfg["train"], extra), "distill", seed=cfg["seed"])
    out = _out_dir(cfg)
    X, _, _ = read_training_csvs(ds, obs)
    student = distill_arrays(load_model(model_path), corruption, X, tc)
    save_model(student, out / "student.json")
    write_loss_csv(student.history, out / "loss.csv")
    _manifest(out, "distill", cfg, inputs=[ds, obs, model_path], outputs=["loss.csv", "student.json"])
    return out


def _policy(spec, name: str | None = None):
    if spec in (None, "oracle"):
        return H.Oracle()
    p = _existing(spec, "model")
    return H.Regressor(load_model(p), name or p.stem)


_EPISODE_KEYS = {"dt", "duration", "laps", "target_speed", "perturbation_pct", "dynamics",
                 "dx_nominal"}


def _episode(cfg: dict, section: dict) -> H.EpisodeConfig:
    params = {k: v for k, v in section.items() if k in _EPISODE_KEYS}
    params.setdefault("dx_nominal", float(cfg["dx_nominal"]))
    ep = _build(H.EpisodeConfig, params, "episode", vehicle=_vehicle(cfg), seed=cfg["seed"])
    try:
        ep.validate()
    except H.ConfigError as e:
        raise ValidationError(str(e)) from e
    return ep


def _sweep_config(cfg: dict, section: dict) -> H.SweepConfig:
    keys = {"starts", "start_offset", "heading_jitter", "repeats"}
    return H.SweepConfig(episode=_episode(cfg, section),
                         bundle=_build(H.BundleConfig, {k: v for k, v in cfg["generate"].items()
                                                        if k != "n_traj"}, "generate"),
                         label=_label_config(cfg),
                         train=(None if "train" not in section else
                                _build(TrainConfig, section["train"], "sweep.train", seed=cfg["seed"])),
                         seed=cfg["seed"], **{k: section[k] for k in keys if k in section})


def cmd_eval(cfg: dict) -> Path:
    course = _course(cfg["course"])
    section = cfg["eval"]
    policy_spec = section.get("policy", "oracle")
    inputs = [] if policy_spec in (None, "oracle") else [_existing(policy_spec, "eval.policy")]
    sc = _sweep_config(cfg, section)
    out = _out_dir(cfg)
    policy = _policy(policy_spec)
    starts = H.eval_starts(course, sc.starts, sc.start_offset, sc.heading_jitter, sc.seed)
    if sc.starts == 1:
        starts = [(0.0, sc.start_offset, 0.0)]
    cfgs = H.episodes_from_starts(replace(sc.episode, model=policy), starts, sc.seed)
    reports = H.run_many(course, cfgs)
    written = [_write(out, "report.csv", H.reports_csv(reports))]
    _manifest(out, "eval", cfg, inputs=inputs, outputs=written)
    return out


def _models_for(cfg: dict, section: dict, course: Course, sc: H.SweepConfig) -> dict:
    """Policies named in sweep.models (name -> path | 'oracle' | trajectory count)."""
    spec = section.get("models", {"1-traj": 1, "8-traj": 8})
    out = {}
    for name, v in spec.items():
        if isinstance(v, int) and not isinstance(v, bool):
            model = H.train_on_course(course, v, replace(sc.bundle, seed=sc.seed), sc.label, sc.train)
            out[name] = H.Regressor(model, name)
        else:
            out[name] = _policy(v, name)
    return out


def cmd_sweep(cfg: dict, which: str) -> Path:
    if which not in SWEEPS:
        raise ValidationError(f"unknown sweep {which!r}; valid: {', '.join(SWEEPS)}")
    course = _course(cfg["course"])
    section = dict(cfg["sweep"])
    sc = _sweep_config(cfg, section)
    heldout = _course(section.get("heldout_course", "sharp")) if which == "heldout" else None
    out = _out_dir(cfg)
    if which == "trajectories":
        res = H.sweep_trajectories(section.get("counts", [1, 2, 4, 6, 8, 10]), course, sc)
    elif which == "perturbation":
        res = H.sweep_perturbation(section.get("levels", [0.0, 0.1, 0.2, 0.3]),
                                   _models_for(cfg, section, course, sc), course, sc)
    elif which == "speed":
        res = H.sweep_speed(section.get("speeds", [5.0, 7.5, 9.0, 12.0]),
                            _models_for(cfg, section, course, sc), course, sc,
                            dynamics=section.get("dynamics", "dynamic"))
    else:
        n = section.get("n_traj", 8)
        same = H.eval_heldout(course, _renamed(course, "train"), sc, n)
        other = H.eval_heldout(course, heldout, sc, n)
        rows = [{"course": "same", **same.row()}, {"course": "heldout", **other.row()}]
        res = H.SweepResult("heldout", ("course",), rows)
    written = [_write(out, f"sweep_{which}.csv", res.to_csv() if which != "heldout"
                      else H._rows_csv(res.rows, ["course"])),
               _write(out, f"sweep_{which}_summary.csv", res.summary_csv())]
    if res.failures:
        written.append(_write(out, "failures.json", json.dumps(res.failures, indent=2) + "\n"))
    _manifest(out, f"sweep {which}", cfg, outputs=written)
    return out


def _renamed(course: Course, suffix: str) -> Course:
    return Course(course.segments, f"{course.id}-{suffix}", course.corridor_half_width, course.start)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="global seed (overrides the config)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key, e.g. --set train.epochs=50")
    parser = argparse.ArgumentParser(prog="selfsteer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("generate", "drive the oracle and write TUM trajectories"),
                        ("label", "build the labelled dataset CSV"),
                        ("train", "train the regressor"),
                        ("distill", "distil a student for corrupted observations"),
                        ("eval", "closed-loop evaluation")]:
        sub.add_parser(name, parents=[common], help=help_)
    sw = sub.add_parser("sweep", parents=[common], help="run an experiment sweep")
    sw.add_argument("which", choices=SWEEPS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "sweep":
            cmd_sweep(cfg, args.which)
        else:
            globals()[f"cmd_{args.command}"](cfg)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # any failure inside the pipeline itself
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
