"""Base-model pool: builtin lightweight learners, a file-backed predictor for
precomputed outputs, a client handle for external workers, and out-of-fold
prediction.

The three builtin learners were chosen for decorrelated inductive biases at
desk scale: a multinomial linear classifier trained by full-batch gradient
descent, a class-conditional diagonal Gaussian, and a k-nearest-neighbour
voter. All are deterministic given (data, seed). Seed 0 means no
perturbation; seed s > 0 selects a seeded stratified 90% subsample of the
training rows plus, for the linear learner, a Gaussian weight init
(std 0.01) in place of zeros.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import FoldAssignment, check_prob_matrix
from .errors import (NotFitted, RefitUnsupported, ShapeMismatch, SingularData,
                     WidthMismatch)
from .rng import SplitMix64, derive_seed

SUBSAMPLE_FRACTION = 0.9
PERTURB_INIT_STD = 0.01


@dataclass(frozen=True)
class FitReport:
    fit_seconds: float
    predict_seconds: float = 0.0


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatch("features must be 2-D")
    return X


def _check_training_input(X: np.ndarray, y: np.ndarray) -> None:
    if X.size == 0:
        raise SingularData("empty training data")
    if y.shape != (X.shape[0],):
        raise ShapeMismatch("labels length must match feature rows")


def _stratified_subsample(X: np.ndarray, y: np.ndarray, seed: int,
                          fraction: float = SUBSAMPLE_FRACTION):
    """Seeded per-class subsample keeping round(fraction * n_c), min 1."""
    rng = SplitMix64(derive_seed(seed, "subsample"))
    keep: list[int] = []
    for c in np.unique(y):
        pos = np.flatnonzero(y == c).tolist()
        rng.shuffle(pos)
        m = max(1, int(np.floor(len(pos) * fraction + 0.5)))
        keep.extend(pos[:m])
    keep_arr = np.sort(np.array(keep, dtype=np.int64))
    return X[keep_arr], y[keep_arr]


def _standardizer(X: np.ndarray):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)  # constant features pass through
    return mean, std


def softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy_gd(features: np.ndarray, labels: np.ndarray,
                             class_count: int, *, l2: float = 1e-4,
                             seed: int = 0, max_epochs: int = 1000,
                             tol: float = 1e-6) -> np.ndarray:
    """Full-batch GD on L2-regularized softmax cross-entropy.

    Returns a (C, d+1) weight matrix acting on [x, 1]. Init is zeros, or
    seeded Gaussian (std 0.01) when seed > 0. Stops when the gradient
    inf-norm drops below ``tol`` or after ``max_epochs``. The step size is
    1/L with L = ||X~||_F^2 / (2n) + l2, a Lipschitz bound on the gradient,
    so the iteration cannot diverge on any input.
    """
    X = np.hstack([features, np.ones((features.shape[0], 1))])
    n, d1 = X.shape
    Y = np.zeros((n, class_count))
    Y[np.arange(n), labels] = 1.0
    if seed > 0:
        rng = np.random.default_rng(seed)
        W = rng.normal(0.0, PERTURB_INIT_STD, size=(class_count, d1))
    else:
        W = np.zeros((class_count, d1))
    lipschitz = float(np.sum(X * X)) / (2.0 * n) + l2
    lr = 1.0 / lipschitz
    for _ in range(max_epochs):
        P = softmax_rows(X @ W.T)
        G = (P - Y).T @ X / n + l2 * W
        if np.max(np.abs(G)) < tol:
            break
        W -= lr * G
    return W


class LinearSoftmax:
    """Multinomial linear classifier; z-scores features with training stats."""

    def __init__(self, seed: int = 0, l2: float = 1e-4, max_epochs: int = 1000,
                 tol: float = 1e-6):
        self.seed = seed
        self.l2 = l2
        self.max_epochs = max_epochs
        self.tol = tol
        self._weights = None
        self._mean = None
        self._std = None
        self._classes = None

    def fit(self, X, y, class_count: int | None = None):
        X = _as_matrix(X)
        y = np.asarray(y, dtype=np.int64)
        _check_training_input(X, y)
        if self.seed > 0:
            X, y = _stratified_subsample(X, y, self.seed)
        self._classes = class_count or int(y.max()) + 1
        self._mean, self._std = _standardizer(X)
        Z = (X - self._mean) / self._std
        self._weights = softmax_cross_entropy_gd(
            Z, y, self._classes, l2=self.l2, seed=self.seed,
            max_epochs=self.max_epochs, tol=self.tol)
        return self

    def predict_proba(self, X) -> np.ndarray:
        if self._weights is None:
            raise NotFitted("linear learner not fitted")
        X = _as_matrix(X)
        if X.shape[1] != self._mean.shape[0]:
            raise WidthMismatch("query width differs from training width")
        Z = np.hstack([(X - self._mean) / self._std, np.ones((X.shape[0], 1))])
        return softmax_rows(Z @ self._weights.T)


class GaussianClassConditional:
    """Diagonal Gaussian per class with shared variance smoothing.

    Smoothing adds 1e-9 * max pooled feature variance (floored at 1e-9 so
    all-constant features still fit). Classes absent from the training rows
    keep prior 0 and therefore probability 0.
    """

    def __init__(self, seed: int = 0, smoothing: float = 1e-9):
        self.seed = seed
        self.smoothing = smoothing
        self._means = None
        self._vars = None
        self._log_priors = None

    def fit(self, X, y, class_count: int | None = None):
        X = _as_matrix(X)
        y = np.asarray(y, dtype=np.int64)
        _check_training_input(X, y)
        if self.seed > 0:
            X, y = _stratified_subsample(X, y, self.seed)
        C = class_count or int(y.max()) + 1
        d = X.shape[1]
        max_var = float(X.var(axis=0).max()) if X.shape[0] > 1 else 0.0
        eps = self.smoothing * max(max_var, 1.0)
        self._means = np.zeros((C, d))
        self._vars = np.ones((C, d))
        priors = np.zeros(C)
        for c in range(C):
            rows = X[y == c]
            if rows.shape[0] == 0:
                continue
            priors[c] = rows.shape[0] / X.shape[0]
            self._means[c] = rows.mean(axis=0)
            self._vars[c] = rows.var(axis=0) + eps
        with np.errstate(divide="ignore"):
            self._log_priors = np.log(priors)
        return self

    def predict_proba(self, X) -> np.ndarray:
        if self._means is None:
            raise NotFitted("gaussian learner not fitted")
        X = _as_matrix(X)
        if X.shape[1] != self._means.shape[1]:
            raise WidthMismatch("query width differs from training width")
        n, C = X.shape[0], self._means.shape[0]
        log_joint = np.empty((n, C))
        for c in range(C):
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * self._vars[c])
                               + (X - self._means[c]) ** 2 / self._vars[c], axis=1)
            log_joint[:, c] = self._log_priors[c] + ll
        finite = log_joint > -np.inf
        shift = np.where(finite.any(axis=1, keepdims=True),
                         np.max(np.where(finite, log_joint, -np.inf), axis=1,
                                keepdims=True), 0.0)
        e = np.exp(log_joint - shift)
        return e / e.sum(axis=1, keepdims=True)


class KNearestVoter:
    """k-NN vote over z-scored features; probability = class frequency among
    the k nearest training rows (stable distance ties favour earlier rows)."""

    def __init__(self, seed: int = 0, k: int = 5):
        self.seed = seed
        self.k = k
        self._X = None
        self._y = None
        self._classes = None
        self._mean = None
        self._std = None

    def fit(self, X, y, class_count: int | None = None):
        X = _as_matrix(X)
        y = np.asarray(y, dtype=np.int64)
        _check_training_input(X, y)
        if self.seed > 0:
            X, y = _stratified_subsample(X, y, self.seed)
        self._classes = class_count or int(y.max()) + 1
        self._mean, self._std = _standardizer(X)
        self._X = (X - self._mean) / self._std
        self._y = y
        return self

    def predict_proba(self, X) -> np.ndarray:
        if self._X is None:
            raise NotFitted("knn learner not fitted")
        X = _as_matrix(X)
        if X.shape[1] != self._X.shape[1]:
            raise WidthMismatch("query width differs from training width")
        Z = (X - self._mean) / self._std
        k = min(self.k, self._X.shape[0])
        out = np.zeros((X.shape[0], self._classes))
        for i in range(X.shape[0]):
            dist = np.sum((self._X - Z[i]) ** 2, axis=1)
            nearest = np.argsort(dist, kind="stable")[:k]
            counts = np.bincount(self._y[nearest], minlength=self._classes)
            out[i] = counts / k
        return out


BUILTIN_LEARNERS = {
    "linear": LinearSoftmax,
    "gaussian": GaussianClassConditional,
    "knn": KNearestVoter,
}


class FileBackedPredictor:
    """Predict-only wrapper around a stored n x C probability matrix.

    File format: CSV, no header, one row per instance, paired with a
    sidecar JSON ``{"model": ..., "dataset": ..., "split": ...}`` at
    ``<path>.json``. Any operation that needs a refit must reject this
    predictor with RefitUnsupported.
    """

    def __init__(self, matrix: np.ndarray, meta: dict | None = None):
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.meta = meta or {}

    @classmethod
    def load(cls, csv_path: str | Path) -> "FileBackedPredictor":
        csv_path = Path(csv_path)
        matrix = np.loadtxt(csv_path, delimiter=",", ndmin=2)
        sidecar = csv_path.with_suffix(csv_path.suffix + ".json")
        meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
        return cls(matrix, meta)

    def fit(self, X, y, class_count: int | None = None):
        return self  # stored outputs are the (pre)trained model

    def predict_proba(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if X.shape[0] != self.matrix.shape[0]:
            raise ShapeMismatch(
                f"stored matrix has {self.matrix.shape[0]} rows, query has {X.shape[0]}")
        return self.matrix.copy()


def save_file_backed(csv_path: str | Path, matrix: np.ndarray, *, model: str,
                     dataset: str, split: str) -> None:
    """Write a probability matrix in the file-backed format (shortest
    round-trip decimals) plus its sidecar JSON."""
    csv_path = Path(csv_path)
    matrix = np.asarray(matrix, dtype=np.float64)
    lines = [",".join(repr(float(v)) for v in row) for row in matrix]
    csv_path.write_text("\n".join(lines) + "\n")
    sidecar = csv_path.with_suffix(csv_path.suffix + ".json")
    sidecar.write_text(json.dumps({"model": model, "dataset": dataset,
                                   "split": split}) + "\n")


class BaseModel:
    """Uniform handle over one pool member: name, kind, seed, capabilities."""

    def __init__(self, name: str, kind: str, seed: int, impl, *,
                 supports_refit: bool, factory=None):
        if kind not in ("builtin", "file_backed", "external"):
            raise ValueError(f"unknown kind {kind!r}")
        self.name = name
        self.kind = kind
        self.seed = seed
        self.impl = impl
        self.supports_refit = supports_refit
        self._factory = factory
        self.fit_seconds = 0.0
        self.predict_seconds = 0.0

    def fit(self, X, y, class_count: int | None = None) -> FitReport:
        start = time.perf_counter()
        self.impl.fit(X, y, class_count)
        self.fit_seconds = time.perf_counter() - start
        return FitReport(fit_seconds=self.fit_seconds)

    def predict_proba(self, X) -> np.ndarray:
        start = time.perf_counter()
        probs = self.impl.predict_proba(X)
        self.predict_seconds += time.perf_counter() - start
        return check_prob_matrix(probs)

    def fresh(self, seed: int | None = None) -> "BaseModel":
        """Unfitted copy, optionally reseeded, for OOF and seed-ensemble refits."""
        if not self.supports_refit or self._factory is None:
            raise RefitUnsupported(f"{self.name} ({self.kind}) cannot be refit")
        return self._factory(self.seed if seed is None else seed)


def builtin_model(name: str, learner: str, seed: int = 0) -> BaseModel:
    if learner not in BUILTIN_LEARNERS:
        raise ValueError(f"unknown builtin learner {learner!r}")

    def factory(s: int, _learner=learner, _name=name) -> BaseModel:
        return BaseModel(_name, "builtin", s, BUILTIN_LEARNERS[_learner](seed=s),
                         supports_refit=True,
                         factory=lambda s2: factory(s2))

    return factory(seed)


def file_backed_model(csv_path: str | Path, name: str | None = None) -> BaseModel:
    impl = FileBackedPredictor.load(csv_path)
    return BaseModel(name or impl.meta.get("model", Path(csv_path).stem),
                     "file_backed", 0, impl, supports_refit=False)


def oof_predict(model: BaseModel, features: np.ndarray, labels: np.ndarray,
                folds: FoldAssignment, class_count: int | None = None) -> np.ndarray:
    """Out-of-fold probabilities: row i is predicted by a copy of ``model``
    fitted without fold(i). Requires a refittable model."""
    if not model.supports_refit:
        raise RefitUnsupported(f"{model.name} cannot produce OOF predictions")
    X = _as_matrix(features)
    y = np.asarray(labels, dtype=np.int64)
    if folds.fold_of_row.shape != y.shape or X.shape[0] != y.shape[0]:
        raise ShapeMismatch("folds must cover every row")
    C = class_count or int(y.max()) + 1
    out = np.empty((X.shape[0], C))
    for f in range(folds.fold_count):
        holdout = folds.fold_of_row == f
        member = model.fresh()
        member.fit(X[~holdout], y[~holdout], class_count=C)
        out[holdout] = member.predict_proba(X[holdout])
        model.fit_seconds += member.fit_seconds
        model.predict_seconds += member.predict_seconds
    return out
