"""Shared generators for randomized tests."""

from __future__ import annotations

import numpy as np


def random_prob_matrix(rng: np.random.Generator, n: int, c: int) -> np.ndarray:
    raw = rng.gamma(1.0, 1.0, size=(n, c))
    return raw / raw.sum(axis=1, keepdims=True)


def correlated_pool(rng: np.random.Generator, k: int, c: int, n: int,
                    noise: float = 0.35):
    """K base matrices sharing a common signal so consensus rows exist,
    plus labels drawn near the signal."""
    signal = random_prob_matrix(rng, n, c)
    labels = np.array([rng.choice(c, p=row) for row in signal])
    bases = []
    for _ in range(k):
        raw = signal + noise * rng.gamma(1.0, 1.0, size=(n, c))
        bases.append(raw / raw.sum(axis=1, keepdims=True))
    return bases, labels


def random_hard_preds(rng: np.random.Generator, labels: np.ndarray, c: int,
                      accuracy: float) -> np.ndarray:
    """Hard predictions hitting the label with the given probability."""
    n = labels.size
    preds = labels.copy()
    wrong = rng.random(n) >= accuracy
    offsets = rng.integers(1, c, size=n)
    preds[wrong] = (labels[wrong] + offsets[wrong]) % c
    return preds


class PriorLearner:
    """Seed-ignoring learner predicting training class frequencies."""

    def __init__(self, seed=0):
        self.seed = seed
        self._priors = None

    def fit(self, X, y, class_count=None):
        c = class_count or int(np.max(y)) + 1
        self._priors = np.bincount(y, minlength=c) / len(y)
        return self

    def predict_proba(self, X):
        return np.tile(self._priors, (np.asarray(X).shape[0], 1))


def prior_model(name="prior"):
    from poolbench.learners import BaseModel

    def factory(s):
        return BaseModel(name, "builtin", s, PriorLearner(s),
                         supports_refit=True, factory=factory)

    return factory(0)
