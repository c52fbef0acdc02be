"""Satisfaction prediction: linear SVM, recursive feature elimination,
threshold voting, baseline models, and the per-user task split.

Labels are booleans throughout: True = satisfied.  Annotation strings from
reading sessions map through :data:`ANNOTATION_TO_LABEL`; "hard_to_say" maps
to None and such paragraphs never enter a dataset.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LinearRegression
from sklearn.neural_network import MLPClassifier
from sklearn.svm import SVC
from sklearn.tree import DecisionTreeClassifier

from .errors import ConfigurationError, DataError, TrainingError
from .util import atomic_write_text

ANNOTATION_TO_LABEL = {"useful": True, "useless": False, "hard_to_say": None}

TREE_DEPTHS = (4, 8, 16, 32)


class Origin(NamedTuple):
    """Where a labeled example came from."""

    user: str
    task: str
    judgment: str
    paragraph: str


@dataclass(frozen=True)
class LabeledExample:
    features: np.ndarray
    satisfied: bool
    origin: Origin


def dataset_matrix(examples: list[LabeledExample]):
    """Stack examples into (X, y); validates uniform feature length."""
    if not examples:
        raise DataError("empty dataset")
    lengths = {len(e.features) for e in examples}
    if len(lengths) != 1:
        raise DataError(f"feature lengths differ across dataset: {sorted(lengths)}")
    X = np.stack([np.asarray(e.features, dtype=np.float64) for e in examples])
    y = np.array([e.satisfied for e in examples], dtype=bool)
    return X, y


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scaler:
    """Per-feature centering/scaling fitted on the training split.

    Features that were constant in training (std 0) transform to exactly 0.
    """

    means: np.ndarray
    stds: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        one_dim = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.means.shape[0]:
            raise DataError(f"scaler fitted for {self.means.shape[0]} features, got {X.shape[1]}")
        out = np.zeros_like(X)
        live = self.stds > 0
        out[:, live] = (X[:, live] - self.means[live]) / self.stds[live]
        return out[0] if one_dim else out


def standardize(X: np.ndarray):
    """Fit mean-0/std-1 scaling on X and return (X_standardized, scaler)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("standardize needs a nonempty 2-D dataset")
    if X.shape[0] < 2:
        raise DataError("standardize needs at least 2 examples")
    scaler = Scaler(X.mean(axis=0), X.std(axis=0))
    return scaler.transform(X), scaler


# ---------------------------------------------------------------------------
# Linear SVM and recursive feature elimination
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearModel:
    """Linear separator over a surviving subset of the feature space."""

    weights: np.ndarray       # one weight per surviving feature
    bias: float
    feature_mask: np.ndarray  # original indices of surviving features, ascending
    n_features: int           # length of the full feature vector

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        mask = np.asarray(self.feature_mask, dtype=np.int64)
        if weights.shape != mask.shape:
            raise DataError(f"{weights.size} weights for {mask.size} surviving features")
        if mask.size and (mask.min() < 0 or mask.max() >= self.n_features):
            raise DataError("feature mask outside the feature space")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "feature_mask", mask)


@dataclass(frozen=True)
class RfeConfig:
    regularization_c: float = 1.0
    elimination_fraction: float = 0.10
    target_dims: int = 512
    max_rounds: int | None = None
    seed: int = 0
    class_weighted: bool = True

    def __post_init__(self):
        if not 0 < self.elimination_fraction < 1:
            raise ConfigurationError("elimination_fraction must lie in (0, 1)")
        if self.target_dims < 1:
            raise ConfigurationError("target_dims must be >= 1")
        if self.regularization_c <= 0:
            raise ConfigurationError("regularization C must be positive")


@dataclass(frozen=True)
class RfeResult:
    model: LinearModel
    elimination_order: tuple[int, ...]  # original indices, first eliminated first
    round_sizes: tuple[int, ...]        # surviving-dimension count after each round
    truncated: bool = False             # hit max_rounds before target_dims


def train_linear_svm(X: np.ndarray, y: np.ndarray, C: float = 1.0, *,
                     class_weighted: bool = True,
                     feature_mask: np.ndarray | None = None,
                     n_features: int | None = None) -> LinearModel:
    """Soft-margin linear SVM (hinge loss + L2); deterministic for fixed inputs.

    ``feature_mask`` lets callers train on a column subset while keeping the
    returned model addressed in the original feature space.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=bool)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DataError(f"X of shape {X.shape} does not match {y.shape[0]} labels")
    if y.all() or not y.any():
        raise TrainingError("training data contains a single class")
    svc = SVC(kernel="linear", C=C, tol=1e-6,
              class_weight="balanced" if class_weighted else None)
    svc.fit(X, y.astype(int))
    mask = np.arange(X.shape[1]) if feature_mask is None else np.asarray(feature_mask)
    return LinearModel(svc.coef_.ravel(), float(svc.intercept_[0]), mask,
                       X.shape[1] if n_features is None else int(n_features))


def rfe(X: np.ndarray, y: np.ndarray, cfg: RfeConfig = RfeConfig()) -> RfeResult:
    """Recursive feature elimination driven by linear-SVM weight magnitudes.

    Each round drops the ceil(fraction * current) features with the smallest
    |w| (never overshooting target_dims; ties eliminate the lower original
    index first) until at most target_dims survive.
    """
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    if cfg.target_dims >= d:
        warnings.warn(f"target_dims {cfg.target_dims} >= {d} input dims; nothing to eliminate")
        model = train_linear_svm(X, y, cfg.regularization_c,
                                 class_weighted=cfg.class_weighted)
        return RfeResult(model, (), (d,))

    active = np.arange(d)
    eliminated: list[int] = []
    sizes = [d]
    rounds = 0
    while active.size > cfg.target_dims:
        if cfg.max_rounds is not None and rounds >= cfg.max_rounds:
            break
        model = train_linear_svm(X[:, active], y, cfg.regularization_c,
                                 class_weighted=cfg.class_weighted)
        drop = math.ceil(cfg.elimination_fraction * active.size)
        drop = min(drop, active.size - cfg.target_dims)
        # |w| ascending, original index ascending on ties.
        order = np.lexsort((active, np.abs(model.weights)))
        cut = order[:drop]
        eliminated.extend(int(i) for i in active[cut])
        active = np.delete(active, np.sort(cut))
        sizes.append(int(active.size))
        rounds += 1

    final = train_linear_svm(X[:, active], y, cfg.regularization_c,
                             class_weighted=cfg.class_weighted,
                             feature_mask=active, n_features=d)
    return RfeResult(final, tuple(eliminated), tuple(sizes),
                     truncated=active.size > cfg.target_dims)


def decision_value(model: LinearModel, features: np.ndarray) -> float:
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (model.n_features,):
        raise DataError(
            f"model expects {model.n_features} features, got {features.shape}"
        )
    return float(model.weights @ features[model.feature_mask] + model.bias)


def predict_paragraph(model: LinearModel, features: np.ndarray) -> bool:
    """Satisfied iff the decision value is strictly positive (ties: unsatisfied)."""
    return decision_value(model, features) > 0


# ---------------------------------------------------------------------------
# Judgment-level voting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VotingConfig:
    threshold: int = 3

    def __post_init__(self):
        if int(self.threshold) < 1:
            raise ConfigurationError("voting threshold must be >= 1")
        object.__setattr__(self, "threshold", int(self.threshold))


def judge_satisfaction(paragraph_labels, cfg: VotingConfig) -> bool:
    """Satisfied iff the number of satisfied paragraphs reaches the threshold."""
    return sum(bool(value) for value in paragraph_labels) >= cfg.threshold


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

class BaselineModel:
    """Uniform predict() wrapper over the comparison models."""

    def __init__(self, kind: str, estimator, threshold: float | None = None,
                 chosen_depth: int | None = None):
        self.kind = kind
        self.estimator = estimator
        self.threshold = threshold
        self.chosen_depth = chosen_depth

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.threshold is not None:
            return self.estimator.predict(X) > self.threshold
        return self.estimator.predict(X).astype(bool)


def _accuracy(pred: np.ndarray, gold: np.ndarray) -> float:
    return float(np.mean(pred == gold))


def train_baselines(X, y, X_val=None, y_val=None, seed: int = 0) -> dict[str, BaselineModel]:
    """Linear regression, depth-searched decision tree, and MLP baselines.

    The tree depth is picked from {4, 8, 16, 32} by validation accuracy (ties
    keep the smallest depth).  Without an explicit validation split a
    deterministic 75/25 shuffle of the training data is used.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=bool)
    if y.all() or not y.any():
        raise TrainingError("training data contains a single class")
    if X_val is None:
        rng = np.random.default_rng(seed)
        order = rng.permutation(X.shape[0])
        cut = max(1, int(round(X.shape[0] * 0.75)))
        fit_idx, val_idx = order[:cut], order[cut:]
        if val_idx.size == 0 or len(set(y[fit_idx])) < 2:
            fit_idx = val_idx = order
        X_fit, y_fit = X[fit_idx], y[fit_idx]
        X_val, y_val = X[val_idx], y[val_idx]
    else:
        X_fit, y_fit = X, y
        X_val = np.asarray(X_val, dtype=np.float64)
        y_val = np.asarray(y_val, dtype=bool)

    signed = np.where(y_fit, 1.0, -1.0)
    linear = LinearRegression().fit(X_fit, signed)

    best_depth, best_acc, best_tree = None, -1.0, None
    for depth in TREE_DEPTHS:
        tree = DecisionTreeClassifier(max_depth=depth, random_state=seed).fit(X_fit, y_fit)
        acc = _accuracy(tree.predict(X_val).astype(bool), y_val)
        if acc > best_acc:
            best_depth, best_acc, best_tree = depth, acc, tree

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        mlp = MLPClassifier(hidden_layer_sizes=(64,), random_state=seed,
                            max_iter=500).fit(X_fit, y_fit)

    return {
        "linear": BaselineModel("linear", linear, threshold=0.0),
        "tree": BaselineModel("tree", best_tree, chosen_depth=best_depth),
        "mlp": BaselineModel("mlp", mlp),
    }


# ---------------------------------------------------------------------------
# Task split
# ---------------------------------------------------------------------------

def split_by_task(examples: list[LabeledExample]):
    """Per user: paragraphs of the first two tasks train, the rest test.

    Task order is the order of first appearance per user.  Users with fewer
    than two tasks are dropped with a warning.
    """
    tasks_by_user: dict[str, list[str]] = {}
    for ex in examples:
        seen = tasks_by_user.setdefault(ex.origin.user, [])
        if ex.origin.task not in seen:
            seen.append(ex.origin.task)

    train, test = [], []
    skipped = [u for u, tasks in tasks_by_user.items() if len(tasks) < 2]
    for user in skipped:
        warnings.warn(f"user {user!r} has fewer than 2 tasks; excluded from the split")
    for ex in examples:
        tasks = tasks_by_user[ex.origin.user]
        if len(tasks) < 2:
            continue
        (train if ex.origin.task in tasks[:2] else test).append(ex)
    return train, test


# ---------------------------------------------------------------------------
# Trained-predictor bundle and its JSON file
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParagraphPredictor:
    """Scaler + linear model, the unit that turns raw features into a label."""

    model: LinearModel
    scaler: Scaler
    config: dict = field(default_factory=dict)

    def predict(self, features: np.ndarray) -> bool:
        return predict_paragraph(self.model, self.scaler.transform(features))

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        X = self.scaler.transform(np.atleast_2d(X))
        scores = X[:, self.model.feature_mask] @ self.model.weights + self.model.bias
        return scores > 0


MODEL_FORMAT_VERSION = 1


def save_model(path: str | Path, predictor: ParagraphPredictor) -> Path:
    payload = {
        "version": MODEL_FORMAT_VERSION,
        "n_features": predictor.model.n_features,
        "weights": [float(w) for w in predictor.model.weights],
        "bias": predictor.model.bias,
        "feature_mask": [int(i) for i in predictor.model.feature_mask],
        "scaler": {
            "means": [float(v) for v in predictor.scaler.means],
            "stds": [float(v) for v in predictor.scaler.stds],
        },
        "config": predictor.config,
    }
    return atomic_write_text(path, json.dumps(payload, sort_keys=True) + "\n")


def load_model(path: str | Path) -> ParagraphPredictor:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    if payload.get("version") != MODEL_FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model format version {payload.get('version')}")
    model = LinearModel(np.array(payload["weights"], dtype=np.float64),
                        float(payload["bias"]),
                        np.array(payload["feature_mask"], dtype=np.int64),
                        int(payload["n_features"]))
    scaler = Scaler(np.array(payload["scaler"]["means"], dtype=np.float64),
                    np.array(payload["scaler"]["stds"], dtype=np.float64))
    return ParagraphPredictor(model, scaler, payload.get("config", {}))
