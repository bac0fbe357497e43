"""Domain types, deterministic stratified splitting and fold assignment.

The evaluation protocol per dataset is: 80/20 stratified train/test split,
then a 75/25 train/validation split inside the train portion; combiners that
stack internally use 5-fold or 3-fold stratified CV on the inner train split.
All of it is reproducible bit-for-bit from a single seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ClassTooSmall, ShapeMismatch, TooFewSamples
from .rng import SplitMix64, derive_seed

PROB_ROW_ATOL = 1e-9
WEIGHT_SUM_ATOL = 1e-12
PROB_EPS = 1e-15


@dataclass(frozen=True)
class Dataset:
    """One classification task: features, integer labels, class count.

    ``group_column`` optionally names (by feature index) the categorical
    column whose values define worst-group-accuracy subpopulations.
    """

    id: str
    features: np.ndarray
    labels: np.ndarray
    class_count: int
    group_column: int | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise ShapeMismatch(f"features must be 2-D, got ndim={X.ndim}")
        if y.shape != (X.shape[0],):
            raise ShapeMismatch("labels length must match feature rows")
        if not np.all(np.isfinite(X)):
            raise ValueError(f"dataset {self.id!r} has non-finite feature values")
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2")
        if y.size and (y.min() < 0 or y.max() >= self.class_count):
            raise ValueError("labels outside [0, class_count)")
        present = np.unique(y)
        if present.size != self.class_count:
            missing = sorted(set(range(self.class_count)) - set(present.tolist()))
            raise ValueError(f"classes never observed: {missing}")
        if self.group_column is not None and not 0 <= self.group_column < X.shape[1]:
            raise ValueError("group_column out of range")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SplitSpec:
    """Seeded 80/20 test split plus 75/25 validation split of the remainder."""

    seed: int
    test_fraction: float = 0.20
    val_fraction_of_train: float = 0.25

    def __post_init__(self):
        for name in ("test_fraction", "val_fraction_of_train"):
            f = getattr(self, name)
            if not 0.0 < f < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint, exhaustive row index sets; arrays are sorted ascending."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    warnings: tuple[str, ...] = field(default=())


@dataclass(frozen=True)
class FoldAssignment:
    """fold_of_row[i] is the fold of the i-th row handed to assign_folds."""

    fold_of_row: np.ndarray
    fold_count: int

    def __post_init__(self):
        f = np.asarray(self.fold_of_row, dtype=np.int64)
        if self.fold_count < 2:
            raise ValueError("fold_count must be >= 2")
        if f.size and (f.min() < 0 or f.max() >= self.fold_count):
            raise ValueError("fold ids outside [0, fold_count)")
        sizes = np.bincount(f, minlength=self.fold_count)
        if np.any(sizes == 0):
            raise ValueError("every fold must be non-empty")
        f.setflags(write=False)
        object.__setattr__(self, "fold_of_row", f)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split(dataset: Dataset, spec: SplitSpec) -> SplitIndices:
    """Deterministic stratified train/val/test split.

    Per class: indices are shuffled with a splitmix64 Fisher-Yates stream
    seeded from ``spec.seed``, per-class counts are allocated by
    round-half-up of the exact proportional targets, and the train count is
    floor-guarded at 1 (stealing from val, then test). Classes with fewer
    than 3 rows cannot populate every partition; they are routed toward
    train and a warning is recorded rather than raising.

    Raises ClassTooSmall only if a class would end up absent from train.
    """
    y = dataset.labels
    rng = SplitMix64(derive_seed(spec.seed, "stratified-split"))
    train_parts: list[np.ndarray] = []
    val_parts: list[np.ndarray] = []
    test_parts: list[np.ndarray] = []
    warnings: list[str] = []

    for c in range(dataset.class_count):
        idx = np.flatnonzero(y == c).tolist()
        rng.shuffle(idx)
        n_c = len(idx)
        if n_c == 1:
            warnings.append(f"class {c} is a singleton; routed to train")
            train_parts.append(np.array(idx, dtype=np.int64))
            continue
        n_test = _round_half_up(n_c * spec.test_fraction)
        rest = n_c - n_test
        n_val = _round_half_up(rest * spec.val_fraction_of_train)
        n_train = rest - n_val
        # train must keep at least one row of every class
        while n_train < 1:
            if n_val > 0:
                n_val -= 1
            elif n_test > 0:
                n_test -= 1
            else:
                raise ClassTooSmall(f"class {c} cannot be represented in train")
            n_train = n_c - n_test - n_val
        if n_c < 3:
            warnings.append(f"class {c} has {n_c} rows; some partitions get none")
        test_parts.append(np.array(idx[:n_test], dtype=np.int64))
        val_parts.append(np.array(idx[n_test : n_test + n_val], dtype=np.int64))
        train_parts.append(np.array(idx[n_test + n_val :], dtype=np.int64))

    def _gather(parts):
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(parts))

    train = _gather(train_parts)
    if np.unique(y[train]).size != dataset.class_count:
        raise ClassTooSmall("a class is absent from train")  # pragma: no cover
    return SplitIndices(train=train, val=_gather(val_parts), test=_gather(test_parts),
                        warnings=tuple(warnings))


def assign_folds(indices: np.ndarray, labels: np.ndarray, fold_count: int,
                 seed: int) -> FoldAssignment:
    """Stratified fold assignment by seeded shuffle + round-robin dealing.

    ``labels[i]`` is the label of ``indices[i]``; the returned
    ``fold_of_row`` is aligned with ``indices``. Dealing proceeds class by
    class (ascending label) with the round-robin offset carried across
    classes, so fold sizes stay within +/-1 both per class and overall.
    """
    indices = np.asarray(indices, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if indices.shape != labels.shape:
        raise ShapeMismatch("indices and labels must have equal length")
    if fold_count < 2:
        raise ValueError("fold_count must be >= 2")
    if indices.size < fold_count:
        raise TooFewSamples(f"{indices.size} rows cannot fill {fold_count} folds")

    rng = SplitMix64(derive_seed(seed, f"folds-{fold_count}"))
    fold_of_row = np.empty(indices.size, dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        pos = np.flatnonzero(labels == c).tolist()
        rng.shuffle(pos)
        for j, p in enumerate(pos):
            fold_of_row[p] = (offset + j) % fold_count
        offset = (offset + len(pos)) % fold_count
    return FoldAssignment(fold_of_row=fold_of_row, fold_count=fold_count)


# --- probability-matrix helpers -------------------------------------------

def check_prob_matrix(probs: np.ndarray, atol: float = PROB_ROW_ATOL) -> np.ndarray:
    """Validate an n x C row-stochastic matrix; returns it as float64."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2:
        raise ShapeMismatch("probability matrix must be 2-D")
    if p.size and p.min() < 0:
        raise ValueError("negative probability entry")
    if p.size:
        sums = p.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > atol:
            raise ValueError("rows must sum to 1 within tolerance")
    return p


def renormalize_rows(probs: np.ndarray) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    return p / p.sum(axis=1, keepdims=True)


def clip_probs(probs: np.ndarray, eps: float = PROB_EPS) -> np.ndarray:
    """Clip entries into [eps, 1] and renormalize; applied before any log."""
    return renormalize_rows(np.clip(np.asarray(probs, dtype=np.float64), eps, 1.0))


def check_weights(weights: np.ndarray, atol: float = WEIGHT_SUM_ATOL) -> np.ndarray:
    """Validate a convex weight vector (entries >= 0, sum 1)."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ShapeMismatch("weights must be a non-empty vector")
    if w.min() < 0:
        raise ValueError("negative weight")
    if abs(w.sum() - 1.0) > atol:
        raise ValueError("weights must sum to 1")
    return w


def argmax_labels(probs: np.ndarray) -> np.ndarray:
    """Hard labels from probabilities; ties break to the lowest class index."""
    return np.asarray(np.argmax(probs, axis=1), dtype=np.int64)
