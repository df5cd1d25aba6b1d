"""Observation encoder, FEM/SAP lateral-offset regressor and teacher-student
feature distillation.

The regressor is a small numpy MLP with hand-written backpropagation:

    FEM:  h = relu(W1 @ (mask * (x - shift) / scale) + b1)
    SAP:  y = w3 @ relu(W2 @ [h, command] + b2) + b3

where ``command`` is the one-hot driving intent (left, straight, right).
``shift``, ``scale`` and ``mask`` are fixed from the training data: features
that never varied during training are masked out, so the model cannot
react to them at run time.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .course import COMMANDS, Course
from .geometry import PlanarVec, local_motion
from .vehicle import VehicleState

log = logging.getLogger(__name__)

N_CURVATURE = 13
LOOKAHEAD_SPACING = 1.0  # m between curvature samples
OBS_DIM = 3 + N_CURVATURE
ROUTE_MATCH_THRESHOLD = 5.0
MODEL_FORMAT = "selfsteer-regressor"
MODEL_VERSION = 1


class OffCourse(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class EmptyDataset(ValueError):
    pass


def one_hot(command: str) -> np.ndarray:
    v = np.zeros(3)
    v[COMMANDS.index(command)] = 1.0
    return v


@dataclass(frozen=True)
class ObservationVector:
    features: np.ndarray  # (OBS_DIM,)
    command: np.ndarray  # (3,) one-hot

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        c = np.asarray(self.command, dtype=float)
        if f.ndim != 1 or c.shape != (3,):
            raise ShapeMismatch(f"bad observation shapes {f.shape}, {c.shape}")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(c))):
            raise ValueError("observation entries must be finite")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "command", c)


def observe(state: VehicleState, course: Course, command: str | np.ndarray | None = None,
            threshold: float = ROUTE_MATCH_THRESHOLD, projection=None) -> ObservationVector:
    """Features seen by the regressor in place of a camera image.

    [signed left offset from centerline, heading error, speed,
     centerline curvature at 0, 1, ..., 12 m ahead].
    The command defaults to the annotation of the segment under the vehicle.
    ``projection`` may carry a precomputed ``course.project`` result.
    """
    p = state.pose
    s, offset, tangent = projection if projection is not None else course.project(p.x, p.y)
    if abs(offset) > threshold:
        raise OffCourse(f"vehicle is {offset:.2f} m from the centerline of {course.id}")
    heading_err = math.remainder(p.heading - tangent, 2 * math.pi)
    curv = [course.curvature_at(s + k * LOOKAHEAD_SPACING) for k in range(N_CURVATURE)]
    if command is None:
        command = course.command_at(s)
    cmd = one_hot(command) if isinstance(command, str) else np.asarray(command, dtype=float)
    return ObservationVector(np.array([offset, heading_err, state.speed, *curv]), cmd)


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

PARAM_NAMES = ("W1", "b1", "W2", "b2", "w3", "b3")
FEM_NAMES = ("W1", "b1")
SAP_NAMES = ("W2", "b2", "w3", "b3")


@dataclass
class RegressorModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    shift: np.ndarray
    scale: np.ndarray
    mask: np.ndarray
    history: list = field(default_factory=list, compare=False, repr=False)

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    @property
    def sap_hidden(self) -> int:
        return self.W2.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def copy(self) -> RegressorModel:
        kw = {k: np.array(getattr(self, k), copy=True) for k in (*PARAM_NAMES, "shift", "scale", "mask")}
        return RegressorModel(**kw, history=list(self.history))

    def freeze(self) -> RegressorModel:
        for k in (*PARAM_NAMES, "shift", "scale", "mask"):
            getattr(self, k).setflags(write=False)
        return self

    def flat(self) -> np.ndarray:
        return np.concatenate([getattr(self, k).ravel() for k in PARAM_NAMES])


def init_model(input_dim: int = OBS_DIM, hidden: int = 32, sap_hidden: int = 16,
               seed: int = 0, shift=None, scale=None, mask=None) -> RegressorModel:
    """Uniform(+-1/sqrt(fan_in)) initialisation from a seeded generator."""
    rng = np.random.default_rng(seed)

    def u(fan_in, shape):
        b = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-b, b, size=shape)

    W1, b1 = u(input_dim, (hidden, input_dim)), u(input_dim, hidden)
    W2, b2 = u(hidden + 3, (sap_hidden, hidden + 3)), u(hidden + 3, sap_hidden)
    w3, b3 = u(sap_hidden, sap_hidden), u(sap_hidden, 1)
    shift = np.zeros(input_dim) if shift is None else np.asarray(shift, dtype=float)
    scale = np.ones(input_dim) if scale is None else np.asarray(scale, dtype=float)
    mask = np.ones(input_dim) if mask is None else np.asarray(mask, dtype=float)
    return RegressorModel(W1, b1, W2, b2, w3, b3, shift, scale, mask)


def _check_inputs(model: RegressorModel, X: np.ndarray, C: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ShapeMismatch(f"expected features of width {model.input_dim}, got {X.shape}")
    if C.shape != (X.shape[0], 3):
        raise ShapeMismatch(f"expected commands of shape ({X.shape[0]}, 3), got {C.shape}")


def fem_forward(model: RegressorModel, X: np.ndarray):
    Z = model.mask * (X - model.shift) / model.scale
    A1 = Z @ model.W1.T + model.b1
    return Z, A1, np.maximum(A1, 0.0)


def forward(model: RegressorModel, X: np.ndarray, C: np.ndarray):
    Z, A1, H1 = fem_forward(model, X)
    G = np.hstack([H1, C])
    A2 = G @ model.W2.T + model.b2
    H2 = np.maximum(A2, 0.0)
    y = H2 @ model.w3 + model.b3[0]
    return y, (Z, A1, H1, G, A2, H2)


def predict_batch(model: RegressorModel, X, C) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    _check_inputs(model, X, C)
    return forward(model, X, C)[0]


def predict_dy(model: RegressorModel, obs: ObservationVector) -> float:
    if obs.features.shape != (model.input_dim,):
        raise ShapeMismatch(f"model expects {model.input_dim} features, got {obs.features.shape[0]}")
    return float(predict_batch(model, obs.features[None, :], obs.command[None, :])[0])


def features_of(model: RegressorModel, X) -> np.ndarray:
    """FEM output (post-rectifier hidden features)."""
    return fem_forward(model, np.atleast_2d(np.asarray(X, dtype=float)))[2]


def l1_loss_and_grad(model: RegressorModel, X, C, t) -> tuple[float, dict[str, np.ndarray]]:
    """Mean absolute error and its (sub)gradient; sign(0) is taken as 0."""
    y, (Z, A1, H1, G, A2, H2) = forward(model, X, C)
    r = y - t
    n = len(t)
    loss = float(np.mean(np.abs(r)))
    gy = np.sign(r) / n
    g = {"w3": H2.T @ gy, "b3": np.array([gy.sum()])}
    gA2 = np.outer(gy, model.w3) * (A2 > 0)
    g["W2"] = gA2.T @ G
    g["b2"] = gA2.sum(axis=0)
    gA1 = (gA2 @ model.W2)[:, :model.hidden] * (A1 > 0)
    g["W1"] = gA1.T @ Z
    g["b1"] = gA1.sum(axis=0)
    return loss, g


def feature_mse_and_grad(student: RegressorModel, Xc, H_target) -> tuple[float, dict[str, np.ndarray]]:
    """MSE between the student's FEM features on ``Xc`` and fixed targets, with FEM gradients."""
    Z, A1, H1 = fem_forward(student, Xc)
    D = H1 - H_target
    loss = float(np.mean(D * D))
    gA1 = (2.0 / D.size) * D * (A1 > 0)
    return loss, {"W1": gA1.T @ Z, "b1": gA1.sum(axis=0)}


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 100
    seed: int = 0
    hidden: int = 32
    sap_hidden: int = 16

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            params[k] -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def dataset_arrays(dataset: Sequence) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack LabeledSamples into (features, commands, dy targets)."""
    if len(dataset) == 0:
        raise EmptyDataset("dataset is empty")
    X = np.array([s.observation.features for s in dataset])
    C = np.array([s.observation.command for s in dataset])
    t = np.array([s.motion.dy for s in dataset])
    return X, C, t


def standardizer(X: np.ndarray, min_std: float = 1e-6) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-feature mean, std and keep-mask; constant features are masked out."""
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    keep = sd > min_std * (1.0 + np.abs(mu))
    return mu, np.where(keep, sd, 1.0), keep.astype(float)


def _minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for i in range(0, n, batch_size):
        yield order[i:i + batch_size]


def train_arrays(X, C, t, config: TrainConfig = TrainConfig()) -> RegressorModel:
    X, C, t = (np.asarray(a, dtype=float) for a in (X, C, t))
    if len(t) == 0:
        raise EmptyDataset("dataset is empty")
    model = init_model(X.shape[1], config.hidden, config.sap_hidden, config.seed, *standardizer(X))
    _check_inputs(model, X, C)
    params = model.params()
    opt = Adam(params, config)
    rng = np.random.default_rng(config.seed + 1)
    for epoch in range(config.epochs):
        total = 0.0
        for idx in _minibatches(len(t), config.batch_size, rng):
            loss, grads = l1_loss_and_grad(model, X[idx], C[idx], t[idx])
            total += loss * len(idx)
            opt.step(params, grads)
        model.history.append(total / len(t))
        log.debug("epoch %d loss %.6g", epoch, model.history[-1])
    return model.freeze()


def train(dataset: Sequence, config: TrainConfig = TrainConfig()) -> RegressorModel:
    """Fit the regressor to the dy labels of ``dataset`` by L1 loss with Adam."""
    return train_arrays(*dataset_arrays(dataset), config)


# ---------------------------------------------------------------------------
# observation corruption (stand-ins for a weather domain shift)
# ---------------------------------------------------------------------------

class Corruption:
    seed: int = 0

    def __call__(self, X, rng: np.random.Generator | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.apply(X, rng if rng is not None else np.random.default_rng(self.seed))

    def apply(self, X, rng):
        return X.copy()


@dataclass
class IdentityCorruption(Corruption):
    seed: int = 0


@dataclass
class GaussianNoise(Corruption):
    sigma: float | np.ndarray
    seed: int = 0

    def apply(self, X, rng):
        return X + rng.normal(size=X.shape) * self.sigma


@dataclass
class AffineDistortion(Corruption):
    matrix: np.ndarray
    offset: np.ndarray | float = 0.0

    def apply(self, X, rng):
        return X @ np.asarray(self.matrix).T + self.offset


@dataclass
class FeatureDropout(Corruption):
    rate: float
    seed: int = 0

    def apply(self, X, rng):
        return X * (rng.random(X.shape) >= self.rate)


def distill(teacher: RegressorModel, corruption: Callable, dataset: Sequence,
            config: TrainConfig = TrainConfig()) -> RegressorModel:
    """Train a student FEM on corrupted observations to reproduce the teacher's features.

    The student starts from the teacher's FEM, its SAP is a verbatim copy of
    the teacher's, and the teacher itself is never written to.
    """
    X, _, _ = dataset_arrays(dataset)
    return distill_arrays(teacher, corruption, X, config)


def distill_arrays(teacher: RegressorModel, corruption: Callable, X, config: TrainConfig = TrainConfig()):
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise EmptyDataset("dataset is empty")
    target = features_of(teacher, X)
    Xc = np.asarray(corruption(X), dtype=float)
    student = teacher.copy()
    student.history = []
    params = {k: getattr(student, k) for k in FEM_NAMES}
    opt = Adam(params, config)
    rng = np.random.default_rng(config.seed + 1)
    for epoch in range(config.epochs):
        total = 0.0
        for idx in _minibatches(len(X), config.batch_size, rng):
            loss, grads = feature_mse_and_grad(student, Xc[idx], target[idx])
            total += loss * len(idx)
            opt.step(params, grads)
        student.history.append(total / len(X))
    return student.freeze()


def feature_mse(teacher: RegressorModel, student: RegressorModel, X, corruption: Callable) -> float:
    X = np.asarray(X, dtype=float)
    return float(np.mean((features_of(student, corruption(X)) - features_of(teacher, X)) ** 2))


# ---------------------------------------------------------------------------
# geometric baseline
# ---------------------------------------------------------------------------

def oracle_predictor(course: Course, dx_nominal: float,
                     lateral_offset: Callable[[float], float] | float = 0.0,
                     threshold: float = ROUTE_MATCH_THRESHOLD) -> Callable[[VehicleState], float]:
    """Perfect-geometry dy: the centerline point ``dx_nominal`` ahead, in the vehicle frame.

    ``lateral_offset`` (constant or function of arc length) shifts the target
    sideways, which lets the same controller drive offset variants of a route.
    """
    if not dx_nominal > 0:
        raise ValueError("dx_nominal must be > 0")
    offset_fn = lateral_offset if callable(lateral_offset) else (lambda s, o=float(lateral_offset): o)

    def predict(state: VehicleState) -> float:
        p = state.pose
        s, offset, _ = course.project(p.x, p.y)
        if abs(offset) > threshold:
            raise OffCourse(f"vehicle is {offset:.2f} m from the centerline of {course.id}")
        target = course.pose_at(s + dx_nominal, offset_fn(s + dx_nominal))
        heading = PlanarVec(math.cos(p.heading), math.sin(p.heading))
        return local_motion(heading, PlanarVec(target.x - p.x, target.y - p.y)).dy

    return predict


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def model_to_dict(model: RegressorModel) -> dict:
    arrays = {k: getattr(model, k) for k in (*PARAM_NAMES, "shift", "scale", "mask")}
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "input_dim": model.input_dim,
        "hidden": model.hidden,
        "sap_hidden": model.sap_hidden,
        "arrays": {k: {"shape": list(a.shape), "data": [float(v) for v in a.ravel()]}
                   for k, a in arrays.items()},
    }


def model_from_dict(d: dict) -> RegressorModel:
    if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model file (format={d.get('format')!r}, version={d.get('version')!r})")
    arrays = {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in d["arrays"].items()}
    return RegressorModel(**arrays).freeze()


def save_model(model: RegressorModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n")


def load_model(path) -> RegressorModel:
    return model_from_dict(json.loads(Path(path).read_text()))


def write_loss_csv(history: Sequence[float], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for i, v in enumerate(history):
            w.writerow([i, f"{v:.9g}"])


def with_sap_of(student: RegressorModel, teacher: RegressorModel) -> RegressorModel:
    return replace(student, **{k: np.array(getattr(teacher, k), copy=True) for k in SAP_NAMES})
