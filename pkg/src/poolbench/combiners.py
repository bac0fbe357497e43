"""The six ensemble strategies over a fixed pool of K base predictors.

Every strategy fits on validation and/or out-of-fold data and predicts on
test. Convex strategies (weighted averaging, greedy selection, temperature
blending, the seed ensemble) share combine_convex, so the consensus-ceiling
property is inherited from a single code path. Argmax ties break to the
lowest class index everywhere; greedy ties break to the lowest base index.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import assign_folds, check_weights, clip_probs
from .errors import RefitUnsupported, ShapeMismatch
from .learners import BaseModel, builtin_model, oof_predict, softmax_cross_entropy_gd, softmax_rows
from .metrics import accuracy
from .rng import derive_seed

T_MIN, T_MAX = 0.05, 20.0
FLAT_OBJECTIVE_TOL = 1e-12
GOLDEN_TOL_LOG = 1e-4
GOLDEN_MAX_ITERS = 200
DEFAULT_LEVEL2_LEARNERS = ("linear", "gaussian", "knn")


@dataclass(frozen=True)
class GreedyConfig:
    iterations: int = 50
    objective: str = "accuracy"

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.objective != "accuracy":
            raise ValueError("only the accuracy objective is implemented")


@dataclass(frozen=True)
class CascadeConfig:
    levels: int = 2
    oof_folds: int = 3
    final_selection_iterations: int = 50

    def __post_init__(self):
        if self.levels != 2:
            raise ValueError("only the 2-level cascade is implemented")


@dataclass(frozen=True)
class SeedEnsembleConfig:
    seeds_per_base: int = 3

    def __post_init__(self):
        if self.seeds_per_base < 2:
            raise ValueError("seeds_per_base must be >= 2")


@dataclass(frozen=True)
class TemperatureVector:
    temperatures: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.temperatures, dtype=np.float64)
        if t.ndim != 1 or t.size == 0:
            raise ShapeMismatch("temperatures must be a non-empty vector")
        if t.min() < T_MIN or t.max() > T_MAX:
            raise ValueError(f"temperatures must lie in [{T_MIN}, {T_MAX}]")
        object.__setattr__(self, "temperatures", t)

    def to_manifest(self) -> dict:
        return {"schema": 1, "kind": "temp_scaled_blend",
                "temperatures": self.temperatures.tolist()}


def _check_pool(bases) -> list[np.ndarray]:
    mats = [np.asarray(b, dtype=np.float64) for b in bases]
    if not mats:
        raise ShapeMismatch("empty base pool")
    shape = mats[0].shape
    if len(shape) != 2:
        raise ShapeMismatch("base matrices must be 2-D")
    for m in mats:
        if m.shape != shape:
            raise ShapeMismatch("base matrices must share one shape")
    return mats


def combine_convex(bases, weights: np.ndarray) -> np.ndarray:
    """Convex combination sum_k w_k * P_k of same-shape probability matrices."""
    mats = _check_pool(bases)
    w = check_weights(weights)
    if w.size != len(mats):
        raise ShapeMismatch("one weight per base required")
    out = np.zeros_like(mats[0])
    for wk, mat in zip(w, mats):
        out += wk * mat
    return out


def fit_weighted_average(base_val_probs, val_labels) -> np.ndarray:
    """Performance weights w_k = acc_k / sum_j acc_j on the validation split.

    Falls back to uniform weights when every base scores zero.
    """
    mats = _check_pool(base_val_probs)
    scores = np.array([accuracy(m, val_labels) for m in mats])
    total = scores.sum()
    if total == 0.0:
        return np.full(len(mats), 1.0 / len(mats))
    return scores / total


@dataclass(frozen=True)
class GreedySelection:
    """Forward-selection result: weights are selection counts over S."""

    weights: np.ndarray
    selections: tuple[int, ...]
    objective: str = "accuracy"

    def to_manifest(self) -> dict:
        return {"schema": 1, "kind": "greedy_selection",
                "weights": self.weights.tolist(),
                "selections": list(self.selections)}


def fit_greedy_selection(base_val_probs, val_labels,
                         cfg: GreedyConfig | None = None) -> GreedySelection:
    """Forward selection with replacement, all S iterations, no early stop.

    Each step adds the base whose inclusion maximises the validation
    accuracy of the uniform average of the current multiset plus one copy
    of the candidate; ties keep the lowest base index. The first selection
    is therefore an accuracy-argmax base.
    """
    cfg = cfg or GreedyConfig()
    mats = _check_pool(base_val_probs)
    y = np.asarray(val_labels, dtype=np.int64)
    k = len(mats)
    stack = np.stack(mats)
    running = np.zeros_like(mats[0])
    counts = np.zeros(k, dtype=np.int64)
    selections: list[int] = []
    for step in range(cfg.iterations):
        candidates = (running[None, :, :] + stack) / (step + 1)
        accs = np.mean(candidates.argmax(axis=2) == y[None, :], axis=1)
        best_idx = int(np.argmax(accs))  # first maximum = lowest base index
        running += mats[best_idx]
        counts[best_idx] += 1
        selections.append(best_idx)
    return GreedySelection(weights=counts / cfg.iterations,
                           selections=tuple(selections))


# --- stacking ---------------------------------------------------------------

@dataclass(frozen=True)
class StackingModel:
    """Multinomial linear meta-learner over the K*C concatenated base
    probabilities plus bias; meta_weights is C x (K*C + 1)."""

    meta_weights: np.ndarray
    class_count: int
    base_count: int

    def to_manifest(self) -> dict:
        return {"schema": 1, "kind": "stacking",
                "class_count": self.class_count, "base_count": self.base_count,
                "meta_weights": self.meta_weights.tolist()}


def _stack_features(base_probs) -> np.ndarray:
    return np.hstack(_check_pool(base_probs))


def fit_stacking(base_oof_probs, train_labels, *, l2: float = 1e-4,
                 max_epochs: int = 1000, tol: float = 1e-6) -> StackingModel:
    """Train the meta-learner on out-of-fold base probabilities.

    Same optimizer contract as the builtin linear learner (full-batch GD,
    L2 1e-4, zero init, gradient tolerance 1e-6, 1000 epochs); features are
    the raw probabilities, not z-scored, so the stored weights act directly
    on concatenated base outputs.
    """
    mats = _check_pool(base_oof_probs)
    y = np.asarray(train_labels, dtype=np.int64)
    c = mats[0].shape[1]
    features = np.hstack(mats)
    weights = softmax_cross_entropy_gd(features, y, c, l2=l2, seed=0,
                                       max_epochs=max_epochs, tol=tol)
    return StackingModel(meta_weights=weights, class_count=c, base_count=len(mats))


def predict_stacking(model: StackingModel, base_test_probs) -> np.ndarray:
    features = _stack_features(base_test_probs)
    if features.shape[1] + 1 != model.meta_weights.shape[1]:
        raise ShapeMismatch("base pool width differs from the fitted meta-learner")
    z = np.hstack([features, np.ones((features.shape[0], 1))])
    return softmax_rows(z @ model.meta_weights.T)


# --- temperature scaling ----------------------------------------------------

def _nll_at_log_temp(log_probs: np.ndarray, labels: np.ndarray, u: float) -> float:
    z = log_probs / math.exp(u)
    m = z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    return float(np.mean(lse - z[np.arange(labels.size), labels]))


def fit_temperature(base_val_probs_k: np.ndarray, val_labels: np.ndarray) -> float:
    """Scalar temperature minimising validation NLL of softmax(log p / T).

    Golden-section search on log T over [ln 0.05, ln 20] to 1e-4 log-space
    tolerance (at most 200 iterations); probabilities are clipped to
    [1e-15, 1] and renormalized before the log. A bracket whose objective
    is flat within 1e-12 returns T = 1.
    """
    y = np.asarray(val_labels, dtype=np.int64)
    log_probs = np.log(clip_probs(base_val_probs_k))
    lo, hi = math.log(T_MIN), math.log(T_MAX)
    probes = [_nll_at_log_temp(log_probs, y, u) for u in (lo, 0.0, hi)]
    if max(probes) - min(probes) <= FLAT_OBJECTIVE_TOL:
        return 1.0
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = _nll_at_log_temp(log_probs, y, c)
    fd = _nll_at_log_temp(log_probs, y, d)
    for _ in range(GOLDEN_MAX_ITERS):
        if b - a <= GOLDEN_TOL_LOG:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = _nll_at_log_temp(log_probs, y, c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = _nll_at_log_temp(log_probs, y, d)
    return math.exp(0.5 * (a + b))


def fit_temperatures(base_val_probs, val_labels) -> TemperatureVector:
    mats = _check_pool(base_val_probs)
    return TemperatureVector(np.array([fit_temperature(m, val_labels) for m in mats]))


def scale_temperature(probs: np.ndarray, temperature: float) -> np.ndarray:
    """softmax(log p / T) per row. T == 1 is the identity and returns the
    input unchanged; otherwise probabilities are clipped before the log."""
    if temperature == 1.0:
        return np.asarray(probs, dtype=np.float64)
    return softmax_rows(np.log(clip_probs(probs)) / temperature)


def temp_scaled_blend(base_test_probs, temperatures: TemperatureVector) -> np.ndarray:
    """Uniform average of per-base temperature-scaled matrices."""
    mats = _check_pool(base_test_probs)
    t = temperatures.temperatures
    if t.size != len(mats):
        raise ShapeMismatch("one temperature per base required")
    scaled = [scale_temperature(m, tk) for m, tk in zip(mats, t)]
    return combine_convex(scaled, np.full(len(mats), 1.0 / len(mats)))


# --- cascade ----------------------------------------------------------------

@dataclass
class CascadeModel:
    """Two-level stack with skip connections plus a final greedy layer.

    Level-2 features are raw features joined with level-1 probabilities
    (OOF during training, full-train predictions at validation/test time).
    The final layer holds greedy weights over the union of level-1 and
    level-2 candidates; prediction consumes the pool's cached full-train
    base matrices so no hidden refits happen.
    """

    level2_models: list[BaseModel]
    weights: np.ndarray
    candidate_names: tuple[str, ...]
    selections: tuple[int, ...]
    class_count: int
    manifest: dict = field(default_factory=dict)
    fit_seconds: float = 0.0

    def predict_proba(self, features: np.ndarray, base_probs) -> np.ndarray:
        mats = _check_pool(base_probs)
        z = np.hstack([np.asarray(features, dtype=np.float64)] + mats)
        candidates = mats + [m.predict_proba(z) for m in self.level2_models]
        return combine_convex(candidates, self.weights)

    def to_manifest(self) -> dict:
        return {"schema": 1, "kind": "cascade", **self.manifest,
                "weights": self.weights.tolist(),
                "candidates": list(self.candidate_names),
                "selections": list(self.selections)}


def fit_cascade(bases: list[BaseModel], train_features, train_labels,
                val_features, val_labels, base_val_probs,
                cfg: CascadeConfig | None = None, *, class_count: int,
                seed: int = 0,
                level2_learners: tuple[str, ...] = DEFAULT_LEVEL2_LEARNERS
                ) -> CascadeModel:
    """Fit the two-level cascade.

    ``bases`` are the pool handles (already fitted on full train) and
    ``base_val_probs`` their cached validation predictions. Level 1: each
    base produces 3-fold OOF probabilities on train. Level 2: each builtin
    learner fits raw-plus-OOF features, records its own 3-fold OOF, and is
    refit on the full level-2 training block for the prediction path. The
    final layer greedily selects (S iterations, validation accuracy) over
    level-1 and level-2 candidates.
    """
    cfg = cfg or CascadeConfig()
    started = time.perf_counter()
    for b in bases:
        if not b.supports_refit:
            raise RefitUnsupported(f"cascade cannot refit {b.name} ({b.kind})")
    X_tr = np.asarray(train_features, dtype=np.float64)
    y_tr = np.asarray(train_labels, dtype=np.int64)
    X_val = np.asarray(val_features, dtype=np.float64)
    y_val = np.asarray(val_labels, dtype=np.int64)
    val_mats = _check_pool(base_val_probs)

    folds1 = assign_folds(np.arange(y_tr.size), y_tr, cfg.oof_folds,
                          derive_seed(seed, "cascade-level1"))
    level1_oof = [oof_predict(b, X_tr, y_tr, folds1, class_count) for b in bases]
    z_train = np.hstack([X_tr] + level1_oof)

    level2_models: list[BaseModel] = []
    level2_oof_acc: dict[str, float] = {}
    if level2_learners:
        folds2 = assign_folds(np.arange(y_tr.size), y_tr, cfg.oof_folds,
                              derive_seed(seed, "cascade-level2"))
        for lname in level2_learners:
            model = builtin_model(f"level2_{lname}", lname, seed=0)
            l2_oof = oof_predict(model, z_train, y_tr, folds2, class_count)
            level2_oof_acc[model.name] = accuracy(l2_oof, y_tr)
            model.fit(z_train, y_tr, class_count=class_count)
            level2_models.append(model)

    z_val = np.hstack([X_val] + val_mats)
    candidates_val = val_mats + [m.predict_proba(z_val) for m in level2_models]
    names = tuple(b.name for b in bases) + tuple(m.name for m in level2_models)
    greedy = fit_greedy_selection(candidates_val, y_val,
                                  GreedyConfig(cfg.final_selection_iterations))
    manifest = {
        "levels": cfg.levels,
        "oof_folds": cfg.oof_folds,
        "level1_oof_accuracy": {b.name: accuracy(m, y_tr)
                                for b, m in zip(bases, level1_oof)},
        "level2_oof_accuracy": level2_oof_acc,
        "candidate_val_accuracy": {n: accuracy(m, y_val)
                                   for n, m in zip(names, candidates_val)},
    }
    return CascadeModel(level2_models=level2_models, weights=greedy.weights,
                        candidate_names=names, selections=greedy.selections,
                        class_count=class_count, manifest=manifest,
                        fit_seconds=time.perf_counter() - started)


# --- seed ensemble ----------------------------------------------------------

def _mean_matrices(mats: list[np.ndarray]) -> np.ndarray:
    # identical variants must average to exactly themselves
    if all(np.array_equal(mats[0], m) for m in mats[1:]):
        return mats[0].copy()
    return np.mean(np.stack(mats), axis=0)


@dataclass
class SeedEnsembleModel:
    """Per base: uniform average over M seed-perturbed refits; across bases:
    weights proportional to the seed-averaged validation accuracy."""

    variants: list[list[BaseModel]]
    base_weights: np.ndarray
    base_names: tuple[str, ...]
    class_count: int
    fit_seconds: float = 0.0
    _train: tuple[np.ndarray, np.ndarray] | None = None

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        per_base = []
        for models in self.variants:
            mats = []
            for m in models:
                if m.kind == "external" and self._train is not None:
                    # a worker holds one model at a time; refit deterministically
                    m.fit(self._train[0], self._train[1], class_count=self.class_count)
                mats.append(m.predict_proba(features))
            per_base.append(_mean_matrices(mats))
        return combine_convex(per_base, self.base_weights)

    def to_manifest(self) -> dict:
        return {"schema": 1, "kind": "seed_ensemble",
                "base_names": list(self.base_names),
                "base_weights": self.base_weights.tolist(),
                "seeds": [[m.seed for m in models] for models in self.variants]}


def fit_seed_ensemble(bases: list[BaseModel], train_features, train_labels,
                      val_features, val_labels,
                      cfg: SeedEnsembleConfig | None = None, *,
                      class_count: int, seed: int = 0) -> SeedEnsembleModel:
    """Fit M seed-perturbed variants of every base and weight bases by the
    validation accuracy of their seed-averaged predictors."""
    cfg = cfg or SeedEnsembleConfig()
    started = time.perf_counter()
    for b in bases:
        if not b.supports_refit:
            raise RefitUnsupported(f"seed ensemble cannot refit {b.name} ({b.kind})")
    X_tr = np.asarray(train_features, dtype=np.float64)
    y_tr = np.asarray(train_labels, dtype=np.int64)
    variants: list[list[BaseModel]] = []
    scores = []
    for b in bases:
        models = []
        val_mats = []
        for m_idx in range(cfg.seeds_per_base):
            s = derive_seed(seed, f"seed-variant:{b.name}:{m_idx}")
            member = b.fresh(s)
            member.fit(X_tr, y_tr, class_count=class_count)
            val_mats.append(member.predict_proba(val_features))
            models.append(member)
        variants.append(models)
        scores.append(accuracy(_mean_matrices(val_mats), val_labels))
    scores = np.array(scores)
    total = scores.sum()
    weights = scores / total if total > 0 else np.full(len(bases), 1.0 / len(bases))
    model = SeedEnsembleModel(variants=variants, base_weights=weights,
                              base_names=tuple(b.name for b in bases),
                              class_count=class_count,
                              fit_seconds=time.perf_counter() - started)
    if any(b.kind == "external" for b in bases):
        model._train = (X_tr, y_tr)
    return model
