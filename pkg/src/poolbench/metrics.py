"""Per-run evaluation metrics.

Conventions fixed here and used everywhere: argmax ties break to the lowest
class index; confidence is the max row probability; calibration bins are 15
equal-width right-closed bins on (0, 1] (an edge value falls in the lower
bin, 1.0 in the top bin); the risk-coverage curve is the per-sample prefix
mean with ties in confidence broken by row index.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import argmax_labels, clip_probs
from .errors import NoGroups, ShapeMismatch, SingleClass

DEFAULT_BINS = 15


def _check(probs: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if p.ndim != 2 or y.ndim != 1 or p.shape[0] != y.shape[0]:
        raise ShapeMismatch("probs must be (n, C) and labels (n,)")
    if y.size and (y.min() < 0 or y.max() >= p.shape[1]):
        raise ShapeMismatch("label outside [0, C)")
    return p, y


def accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    p, y = _check(probs, labels)
    return float(np.mean(argmax_labels(p) == y))


def weighted_f1(probs: np.ndarray, labels: np.ndarray) -> float:
    """Per-class F1 averaged with weights = class support / n."""
    p, y = _check(probs, labels)
    pred = argmax_labels(p)
    n = y.size
    total = 0.0
    for c in range(p.shape[1]):
        support = int(np.sum(y == c))
        if support == 0:
            continue
        tp = int(np.sum((pred == c) & (y == c)))
        fp = int(np.sum((pred == c) & (y != c)))
        fn = support - tp
        denom = 2 * tp + fp + fn
        f1 = 2 * tp / denom if denom else 0.0
        total += (support / n) * f1
    return float(total)


def _tied_ranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) of values ascending; ties share their mean rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc_ovr(probs: np.ndarray, labels: np.ndarray) -> float:
    """One-vs-rest ROC-AUC, support-weighted across classes present in labels.

    Per class the binary AUC uses the Mann-Whitney rank formulation, so tied
    scores contribute 0.5. Classes absent from the labels are skipped.
    """
    p, y = _check(probs, labels)
    present = np.unique(y)
    if present.size < 2:
        raise SingleClass("ROC-AUC needs >= 2 classes present")
    total, weight = 0.0, 0
    for c in present:
        pos = y == c
        n_pos = int(pos.sum())
        n_neg = y.size - n_pos
        ranks = _tied_ranks(p[:, c])
        auc = (ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
        total += n_pos * auc
        weight += n_pos
    return float(total / weight)


def log_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    p, y = _check(probs, labels)
    p = clip_probs(p)
    return float(np.mean(-np.log(p[np.arange(y.size), y])))


def _bin_index(confidence: np.ndarray, bins: int) -> np.ndarray:
    # right-closed bins on (0, 1]: an edge value belongs to the lower bin
    idx = np.ceil(confidence * bins).astype(np.int64) - 1
    return np.clip(idx, 0, bins - 1)


def _bin_stats(probs: np.ndarray, labels: np.ndarray, bins: int):
    p, y = _check(probs, labels)
    if bins < 1:
        raise ValueError("bins must be >= 1")
    conf = p.max(axis=1)
    correct = (argmax_labels(p) == y).astype(np.float64)
    idx = _bin_index(conf, bins)
    counts = np.bincount(idx, minlength=bins).astype(np.float64)
    conf_sum = np.bincount(idx, weights=conf, minlength=bins)
    acc_sum = np.bincount(idx, weights=correct, minlength=bins)
    return counts, conf_sum, acc_sum, y.size


def ece(probs: np.ndarray, labels: np.ndarray, bins: int = DEFAULT_BINS) -> float:
    """Expected calibration error: sum_b (n_b/n) * |acc_b - conf_b|."""
    counts, conf_sum, acc_sum, n = _bin_stats(probs, labels, bins)
    nonzero = counts > 0
    gaps = np.abs(acc_sum[nonzero] / counts[nonzero] - conf_sum[nonzero] / counts[nonzero])
    return float(np.sum(counts[nonzero] / n * gaps))


def brier_reliability(probs: np.ndarray, labels: np.ndarray,
                      bins: int = DEFAULT_BINS) -> float:
    """Reliability term of the Brier decomposition on the top-class binary
    problem: sum_b (n_b/n) * (conf_b - acc_b)^2, same binning as ece."""
    counts, conf_sum, acc_sum, n = _bin_stats(probs, labels, bins)
    nonzero = counts > 0
    gaps = conf_sum[nonzero] / counts[nonzero] - acc_sum[nonzero] / counts[nonzero]
    return float(np.sum(counts[nonzero] / n * gaps**2))


def _confidence_order(probs: np.ndarray) -> np.ndarray:
    conf = probs.max(axis=1)
    return np.argsort(-conf, kind="stable")  # ties keep row order


def aurc(probs: np.ndarray, labels: np.ndarray) -> float:
    """Area under the risk-coverage curve with the max-probability scorer:
    mean over prefix sizes i=1..n of the error rate among the i most
    confident rows."""
    p, y = _check(probs, labels)
    order = _confidence_order(p)
    wrong = (argmax_labels(p)[order] != y[order]).astype(np.float64)
    prefix_risk = np.cumsum(wrong) / np.arange(1, y.size + 1)
    return float(prefix_risk.mean())


def coverage_at_accuracy(probs: np.ndarray, labels: np.ndarray,
                         target: float = 0.95) -> float:
    """Largest i/n whose top-i confidence prefix has accuracy >= target."""
    p, y = _check(probs, labels)
    order = _confidence_order(p)
    correct = (argmax_labels(p)[order] == y[order]).astype(np.float64)
    prefix_acc = np.cumsum(correct) / np.arange(1, y.size + 1)
    qualifying = np.flatnonzero(prefix_acc >= target)
    if qualifying.size == 0:
        return 0.0
    return float((qualifying[-1] + 1) / y.size)


def worst_group_accuracy(probs: np.ndarray, labels: np.ndarray,
                         groups: np.ndarray, min_group: int = 5) -> float:
    """Minimum per-group accuracy; groups smaller than ``min_group`` are
    merged into a single rest-group first."""
    if groups is None:
        raise NoGroups("no group assignment supplied")
    p, y = _check(probs, labels)
    g = np.asarray(groups)
    if g.shape != y.shape:
        raise ShapeMismatch("groups length must match labels")
    if g.size == 0:
        raise NoGroups("empty group assignment")
    correct = argmax_labels(p) == y
    ids, counts = np.unique(g, return_counts=True)
    small = {gid for gid, cnt in zip(ids.tolist(), counts.tolist()) if cnt < min_group}
    accs = []
    rest_mask = np.zeros(y.size, dtype=bool)
    for gid in ids.tolist():
        mask = g == gid
        if gid in small:
            rest_mask |= mask
        else:
            accs.append(float(np.mean(correct[mask])))
    if rest_mask.any():
        accs.append(float(np.mean(correct[rest_mask])))
    return float(min(accs))


@dataclass(frozen=True)
class MetricBundle:
    """All per-run metrics plus wall-clock costs. wga is None when the
    dataset defines no groups."""

    accuracy: float
    weighted_f1: float
    roc_auc_ovr: float
    log_loss: float
    ece: float
    brier_rel: float
    aurc: float
    cov_at_95: float
    wga: float | None
    fit_seconds: float
    predict_seconds: float

    def to_dict(self) -> dict:
        return asdict(self)


def compute_bundle(probs: np.ndarray, labels: np.ndarray, *,
                   groups: np.ndarray | None = None,
                   fit_seconds: float = 0.0,
                   predict_seconds: float = 0.0) -> MetricBundle:
    """Evaluate every metric on one prediction matrix."""
    return MetricBundle(
        accuracy=accuracy(probs, labels),
        weighted_f1=weighted_f1(probs, labels),
        roc_auc_ovr=roc_auc_ovr(probs, labels),
        log_loss=log_loss(probs, labels),
        ece=ece(probs, labels),
        brier_rel=brier_reliability(probs, labels),
        aurc=aurc(probs, labels),
        cov_at_95=coverage_at_accuracy(probs, labels),
        wga=None if groups is None else worst_group_accuracy(probs, labels, groups),
        fit_seconds=fit_seconds,
        predict_seconds=predict_seconds,
    )
