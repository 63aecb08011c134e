"""One-versus-all linear SVM trained by dual coordinate descent.

Each binary problem is the L1-loss (hinge) SVM

    min_w  1/2 |w|^2 + C sum_i max(0, 1 - y_i w.x_i)

with the bias folded into ``w`` through a constant feature of 1 appended to
every row (so the bias is regularised as well). The dual is solved one
coordinate at a time in a seeded random order per epoch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    max_epochs: int = 100
    tolerance: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not self.C > 0:
            raise ValidationError(f"C must be positive, got {self.C!r}")
        if self.max_epochs < 1 or not self.tolerance > 0:
            raise ValidationError("max_epochs and tolerance must be positive")


@dataclass(frozen=True)
class LinearSvmModel:
    classes: tuple
    weights: np.ndarray  # (num_classes, F)
    biases: np.ndarray  # (num_classes,)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    def decision_function(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.feature_dim:
            raise ValidationError(
                f"features have dimension {x.shape[1]}, model expects {self.feature_dim}")
        return x @ self.weights.T + self.biases


@dataclass
class BinaryFit:
    w: np.ndarray
    b: float
    dual_objectives: list[float]
    epochs: int


def train_binary(x: np.ndarray, y: np.ndarray, config: TrainConfig,
                 rng: np.random.Generator) -> BinaryFit:
    """Dual coordinate descent for one +1/-1 problem.

    Stops when the projected-gradient spread of an epoch falls below
    ``config.tolerance``. ``dual_objectives`` records ``1/2 |w|^2 - sum(a)``
    after every epoch; it never increases.
    """
    m = x.shape[0]
    xa = np.hstack([x, np.ones((m, 1))])
    sq = np.einsum("ij,ij->i", xa, xa)
    alpha = np.zeros(m)
    w = np.zeros(xa.shape[1])
    C = config.C
    history = []
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        pg_max, pg_min = -np.inf, np.inf
        for i in rng.permutation(m):
            if sq[i] == 0:
                continue
            g = y[i] * (xa[i] @ w) - 1.0
            a = alpha[i]
            if a == 0:
                pg = min(g, 0.0)
            elif a == C:
                pg = max(g, 0.0)
            else:
                pg = g
            pg_max = max(pg_max, pg)
            pg_min = min(pg_min, pg)
            if pg != 0.0:
                new = min(max(a - g / sq[i], 0.0), C)
                w += (new - a) * y[i] * xa[i]
                alpha[i] = new
        history.append(0.5 * float(w @ w) - float(alpha.sum()))
        if pg_max - pg_min < config.tolerance:
            break
    return BinaryFit(w[:-1].copy(), float(w[-1]), history, epoch)


def train_ova(features, labels, config: TrainConfig | None = None,
              return_fits: bool = False):
    """One binary SVM per class (class vs rest); classes sorted ascending."""
    config = config or TrainConfig()
    x = np.asarray(features, dtype=np.float64)
    labels = list(labels)
    if x.ndim != 2 or x.shape[0] != len(labels):
        raise ValidationError(f"{len(labels)} labels for features of shape {x.shape}")
    if x.shape[0] < 2:
        raise ValidationError("need at least two training samples")
    if not np.all(np.isfinite(x)):
        raise ValidationError("features contain non-finite values")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ValidationError("need at least two distinct classes")
    lab = np.array([classes.index(c) for c in labels])
    rng = np.random.default_rng(config.seed)
    weights = np.empty((len(classes), x.shape[1]))
    biases = np.empty(len(classes))
    fits = []
    for c in range(len(classes)):
        y = np.where(lab == c, 1.0, -1.0)
        fit = train_binary(x, y, config, rng)
        weights[c], biases[c] = fit.w, fit.b
        fits.append(fit)
    model = LinearSvmModel(classes, weights, biases)
    return (model, fits) if return_fits else model


def predict(model: LinearSvmModel, features) -> list:
    """Arg-max of the class scores; ties go to the lowest class index."""
    scores = model.decision_function(features)
    return [model.classes[i] for i in np.argmax(scores, axis=1)]


def confusion_matrix(true, pred, classes) -> np.ndarray:
    """Counts, rows indexed by the true class and columns by the prediction."""
    index = {c: i for i, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(true, pred):
        cm[index[t], index[p]] += 1
    return cm


@dataclass(frozen=True)
class Evaluation:
    accuracy: float
    confusion: np.ndarray
    classes: tuple

    @property
    def per_class_accuracy(self) -> np.ndarray:
        counts = self.confusion.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(counts > 0, np.diag(self.confusion) / np.maximum(counts, 1), np.nan)


def evaluate(model: LinearSvmModel, features, labels) -> Evaluation:
    labels = list(labels)
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[0] != len(labels):
        raise ValidationError(f"{len(labels)} labels for {x.shape[0]} feature rows")
    if not labels:
        raise ValidationError("cannot evaluate on an empty set")
    pred = predict(model, x)
    classes = tuple(sorted(set(model.classes) | set(labels)))
    acc = float(np.mean([p == t for p, t in zip(pred, labels)]))
    return Evaluation(acc, confusion_matrix(labels, pred, classes), classes)
