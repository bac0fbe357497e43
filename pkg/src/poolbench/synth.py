"""Synthetic Gaussian-mixture classification tasks for desk-scale benchmarks."""

from __future__ import annotations

import numpy as np

from .core import Dataset


def make_gaussian_mixture(dataset_id: str, *, n: int = 300, d: int = 8,
                          class_count: int = 2, seed: int = 0,
                          class_sep: float = 2.0,
                          group_count: int | None = None) -> Dataset:
    """One Gaussian blob per class, unit covariance, seeded means.

    Classes are balanced up to rounding and rows are permuted. When
    ``group_count`` is set, an extra categorical column of random group ids
    is appended and designated as the worst-group column.
    """
    if n < class_count:
        raise ValueError("need at least one row per class")
    rng = np.random.default_rng(seed)
    means = rng.normal(0.0, class_sep, size=(class_count, d))
    labels = np.arange(n) % class_count
    labels = labels[rng.permutation(n)]
    X = means[labels] + rng.standard_normal((n, d))
    group_column = None
    if group_count is not None:
        groups = rng.integers(0, group_count, size=n).astype(np.float64)
        X = np.hstack([X, groups[:, None]])
        group_column = d
    return Dataset(id=dataset_id, features=X, labels=labels,
                   class_count=class_count, group_column=group_column)
