"""Prediction, the training dispatcher, grid-search CV and leave-one-group-out."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import DimensionMismatch, SingleGroup, TooFewSamples
from ..metrics import confusion, f1, per_label_f1
from .forest import train_forest, tree_predict
from .labels import encode_labels
from .logistic import train_logistic
from .model import TrainedModel
from .pls import pls_predict
from .rng import SplitMix64
from .svm import train_svm

DEFAULT_GRIDS = {
    "logistic": {"l2": [1e-4, 1e-2, 1.0]},
    "svm": {"l2": [1e-4, 1e-2, 1.0]},
    "forest": {"n_trees": [100], "max_depth": [8, None]},
}
_PARAM_NAMES = {
    "logistic": ("l2", "max_iter", "tol"),
    "svm": ("l2", "epochs", "fit_intercept"),
    "forest": ("n_trees", "max_depth", "min_leaf", "mtry", "bootstrap"),
}


def train(kind, X, y, params=None, seed=0, labels=None) -> TrainedModel:
    """Train a ``logistic``/``svm``/``forest`` classifier from a hyperparameter dict."""
    params = dict(params or {})
    if kind not in _PARAM_NAMES:
        raise ValueError(f"unknown classifier kind {kind!r}")
    unknown = set(params) - set(_PARAM_NAMES[kind])
    if unknown:
        raise ValueError(f"unknown {kind} parameters: {sorted(unknown)}")
    if kind == "logistic":
        return train_logistic(X, y, labels=labels, **params)
    if kind == "svm":
        return train_svm(X, y, seed=seed, labels=labels, **params)
    return train_forest(X, y, seed=seed, labels=labels, **params)


def _check_dims(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} features, got {X.shape[1]}")
    return X


def decision_function(model: TrainedModel, X) -> np.ndarray:
    """Raw linear margins ``X @ w.T + b`` for logistic/svm models, shape (n, m)."""
    X = _check_dims(model, X)
    return X @ model.params["weights"].T + model.params["bias"]


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    """Per-label scores in [0, 1], shape ``(n, len(model.labels))``.

    * logistic: ``sigmoid(w.x + b)``; binary models return ``[1 - p, p]``,
      one-vs-rest models one independent sigmoid per label.
    * svm: ``clip((margin + 1) / 2, 0, 1)`` -- a score, not a calibrated
      probability; binary models again return ``[1 - s, s]``.
    * forest: fraction of trees voting for each label.
    """
    if model.kind == "pls":
        raise TypeError("PLS models are regressors; use pls_predict")
    X = _check_dims(model, X)
    if model.kind == "forest":
        votes = np.zeros((X.shape[0], len(model.labels)))
        rows = np.arange(X.shape[0])
        trees = model.params["trees"]
        for tree in trees:
            votes[rows, tree_predict(tree, X)] += 1.0
        return votes / len(trees)
    margin = decision_function(model, X)
    s = expit(margin) if model.kind == "logistic" else np.clip((margin + 1.0) / 2.0, 0.0, 1.0)
    if len(model.labels) == 2:
        return np.column_stack([1.0 - s[:, 0], s[:, 0]])
    return s


def predict(model: TrainedModel, X) -> list:
    """Labels by argmax of :func:`predict_proba`; ties go to the earlier label."""
    if model.kind == "pls":
        return pls_predict(model, X)
    proba = predict_proba(model, X)
    return [model.labels[i] for i in np.argmax(proba, axis=1)]


@dataclass
class CvPlan:
    folds: int = 3
    grid: dict | None = None
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        for name, values in (self.grid or {}).items():
            if len(values) == 0:
                raise ValueError(f"grid entry {name!r} is empty")


def grid_cells(grid: dict) -> list[dict]:
    """Row-major enumeration: the last parameter varies fastest."""
    names = list(grid)
    return [dict(zip(names, combo)) for combo in itertools.product(*(grid[k] for k in names))]


def stratified_folds(y, folds, seed) -> np.ndarray:
    """Fold id per row. Within each label (sorted order) the row indices are
    shuffled with SplitMix64(seed), then dealt round-robin; the dealing
    counter carries over from one label to the next."""
    labels, codes = encode_labels(y, allow_single=True)
    counts = np.bincount(codes, minlength=len(labels))
    if len(labels) < 2 or counts.min() < folds:
        raise TooFewSamples(f"{folds} folds need at least {folds} rows of every class, got {counts.tolist()}")
    rng = SplitMix64(seed)
    out = np.empty(len(codes), dtype=np.int64)
    k = 0
    for c in range(len(labels)):
        members = rng.shuffle(np.nonzero(codes == c)[0].tolist())
        for i in members:
            out[i] = k % folds
            k += 1
    return out


def _score(model, X, y):
    pred = predict(model, X)
    labels = model.labels
    if len(labels) == 2:
        return f1(confusion(pred, np.asarray(y).tolist(), labels[1]))
    return per_label_f1(pred, np.asarray(y).tolist(), labels)[1]


def grid_search_cv(X, y, kind, plan: CvPlan | None = None, labels=None, jobs=1):
    """Stratified k-fold grid search scored by validation F1.

    Binary tasks score the positive label's F1, multi-class tasks the macro
    F1. Returns ``(best_params, cells)`` where ``cells`` is a list of
    ``(params, mean_f1)`` in enumeration order; the first cell with the
    highest mean wins.
    """
    plan = plan or CvPlan()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    grid = plan.grid if plan.grid is not None else DEFAULT_GRIDS[kind]
    cells = grid_cells(grid)
    fold_of = stratified_folds(y, plan.folds, plan.seed)
    labels = labels if labels is not None else encode_labels(y)[0]
    tasks = [(ci, f) for ci in range(len(cells)) for f in range(plan.folds)]

    def run(task):
        ci, f = task
        tr, va = fold_of != f, fold_of == f
        model = train(kind, X[tr], y[tr], cells[ci], seed=plan.seed, labels=labels)
        return _score(model, X[va], y[va])

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            scores = list(ex.map(run, tasks))
    else:
        scores = [run(t) for t in tasks]
    means = np.array(scores).reshape(len(cells), plan.folds).mean(axis=1)
    best = int(np.argmax(means))
    return dict(cells[best]), [(dict(c), float(m)) for c, m in zip(cells, means)]


def leave_one_group_out(X, y, groups, kind, params=None, seed=0, labels=None, jobs=1):
    """Hold out each group in turn (first-occurrence order), train on the rest.

    Returns ``(predictions, accuracy)`` with one prediction per row.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    groups = list(np.asarray(groups).tolist())
    order = list(dict.fromkeys(groups))
    if len(order) < 2:
        raise SingleGroup("leave-one-group-out needs at least two groups")
    labels = labels if labels is not None else encode_labels(y)[0]
    garr = np.array([order.index(g) for g in groups])

    def run(gi):
        held = garr == gi
        model = train(kind, X[~held], y[~held], params, seed=seed, labels=labels)
        return held, predict(model, X[held])

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            results = list(ex.map(run, range(len(order))))
    else:
        results = [run(g) for g in range(len(order))]
    pred = [None] * len(y)
    for held, p in results:
        for i, v in zip(np.nonzero(held)[0], p):
            pred[i] = v
    y_list = y.tolist()
    accuracy = sum(1 for p, t in zip(pred, y_list) if p == t) / len(y_list)
    return pred, accuracy
