"""Pairwise diversity of a classifier pool and the consensus ceiling.

For a pair of classifiers the 2x2 contingency table over test instances
counts a = both correct, b = first only, c = second only, d = both wrong.
Q = (ad - bc)/(ad + bc) is undefined when ad + bc = 0; undefined cells are
excluded from pair means and recorded, never imputed.

References: Kuncheva & Whitaker (2003), "Measures of diversity in classifier
ensembles and their relationship with the ensemble accuracy".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAgreement, ShapeMismatch


@dataclass(frozen=True)
class ContingencyTable:
    a: int  # both correct
    b: int  # first correct only
    c: int  # second correct only
    d: int  # both wrong

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d


def contingency(preds_k: np.ndarray, preds_l: np.ndarray,
                labels: np.ndarray) -> ContingencyTable:
    pk = np.asarray(preds_k)
    pl = np.asarray(preds_l)
    y = np.asarray(labels)
    if not (pk.shape == pl.shape == y.shape) or pk.ndim != 1:
        raise ShapeMismatch("prediction and label vectors must share one length")
    ck = pk == y
    cl = pl == y
    return ContingencyTable(
        a=int(np.sum(ck & cl)),
        b=int(np.sum(ck & ~cl)),
        c=int(np.sum(~ck & cl)),
        d=int(np.sum(~ck & ~cl)),
    )


def q_statistic(t: ContingencyTable) -> float | None:
    """(ad - bc)/(ad + bc); None when the denominator vanishes."""
    ad = t.a * t.d
    bc = t.b * t.c
    if ad + bc == 0:
        return None
    return (ad - bc) / (ad + bc)


def cohen_kappa(t: ContingencyTable) -> float:
    """Chance-adjusted agreement of the two correctness indicators.

    kappa = (p_o - p_e)/(1 - p_e) with p_o = (a+d)/n and
    p_e = ((a+b)(a+c) + (c+d)(b+d))/n^2. Raises DegenerateAgreement when
    p_e = 1 (both marginals degenerate); callers treat that as undefined.
    """
    n = t.n
    if n == 0:
        raise ValueError("empty table")
    p_o = (t.a + t.d) / n
    p_e = ((t.a + t.b) * (t.a + t.c) + (t.c + t.d) * (t.b + t.d)) / (n * n)
    if p_e == 1.0:
        raise DegenerateAgreement("expected agreement is 1; kappa undefined")
    return (p_o - p_e) / (1.0 - p_e)


def disagreement(t: ContingencyTable) -> float:
    if t.n == 0:
        raise ValueError("empty table")
    return (t.b + t.c) / t.n


@dataclass(frozen=True)
class DiversityReport:
    """Pool-level pairwise diversity. per_pair_q is K x K symmetric with NaN
    on the diagonal and NaN for pairs undefined on every task."""

    per_pair_q: np.ndarray
    mean_q: float
    std_q: float
    mean_kappa: float
    mean_disagreement: float
    undefined_pairs: tuple[tuple[int, int], ...]
    undefined_pair_tasks: dict[str, list[int]] = field(default_factory=dict)
    model_names: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "model_names": list(self.model_names),
            "per_pair_q": [[None if np.isnan(v) else float(v) for v in row]
                           for row in self.per_pair_q],
            "mean_q": self.mean_q,
            "std_q": self.std_q,
            "mean_kappa": self.mean_kappa,
            "mean_disagreement": self.mean_disagreement,
            "undefined_pairs": [list(p) for p in self.undefined_pairs],
            "undefined_pair_tasks": self.undefined_pair_tasks,
        }


def pool_diversity(task_preds, task_labels, model_names=None) -> DiversityReport:
    """Aggregate pairwise diversity over a pool of K models and T tasks.

    ``task_preds[t][k]`` holds model k's hard predictions on task t and
    ``task_labels[t]`` the matching labels. Per unordered pair, Q/kappa/
    disagreement are the unweighted means over the tasks where they are
    defined; pool statistics are then taken over the pairs (pair-then-pool).
    std_q is the population standard deviation over pair means.
    """
    n_tasks = len(task_labels)
    if n_tasks < 1:
        raise ValueError("need at least one task")
    k = len(task_preds[0])
    if k < 2:
        raise ValueError("need at least two models")
    names = tuple(model_names) if model_names else tuple(f"model_{i}" for i in range(k))

    per_pair_q = np.full((k, k), np.nan)
    pair_q_means: list[float] = []
    pair_kappa_means: list[float] = []
    pair_dis_means: list[float] = []
    undefined_pairs: list[tuple[int, int]] = []
    undefined_tasks: dict[str, list[int]] = {}

    for i in range(k):
        for j in range(i + 1, k):
            qs: list[float] = []
            kappas: list[float] = []
            diss: list[float] = []
            dropped: list[int] = []
            for t in range(n_tasks):
                table = contingency(task_preds[t][i], task_preds[t][j], task_labels[t])
                q = q_statistic(table)
                if q is None:
                    dropped.append(t)
                else:
                    qs.append(q)
                try:
                    kappas.append(cohen_kappa(table))
                except DegenerateAgreement:
                    pass
                diss.append(disagreement(table))
            if dropped:
                undefined_tasks[f"{i},{j}"] = dropped
            if qs:
                q_mean = float(np.mean(qs))
                per_pair_q[i, j] = per_pair_q[j, i] = q_mean
                pair_q_means.append(q_mean)
            else:
                undefined_pairs.append((i, j))
            if kappas:
                pair_kappa_means.append(float(np.mean(kappas)))
            pair_dis_means.append(float(np.mean(diss)))

    mean_q = float(np.mean(pair_q_means)) if pair_q_means else float("nan")
    std_q = float(np.std(pair_q_means)) if pair_q_means else float("nan")
    mean_kappa = float(np.mean(pair_kappa_means)) if pair_kappa_means else float("nan")
    return DiversityReport(
        per_pair_q=per_pair_q,
        mean_q=mean_q,
        std_q=std_q,
        mean_kappa=mean_kappa,
        mean_disagreement=float(np.mean(pair_dis_means)),
        undefined_pairs=tuple(undefined_pairs),
        undefined_pair_tasks=undefined_tasks,
        model_names=names,
    )


@dataclass(frozen=True)
class ConsensusReport:
    """Rows where every pool member predicts the same label, and the implied
    ceiling on any convex combiner's accuracy gap."""

    consensus_fraction: float
    ceiling_bound: float
    consensus_mask: np.ndarray

    def to_dict(self) -> dict:
        return {
            "consensus_fraction": self.consensus_fraction,
            "ceiling_bound": self.ceiling_bound,
            "n_consensus": int(np.sum(self.consensus_mask)),
            "n_rows": int(self.consensus_mask.size),
        }


def consensus_report(hard_preds, labels) -> ConsensusReport:
    """Consensus set of K hard-prediction vectors; labels fix the row count."""
    y = np.asarray(labels)
    stack = [np.asarray(p) for p in hard_preds]
    if not stack:
        raise ValueError("need at least one predictor")
    for p in stack:
        if p.shape != y.shape:
            raise ShapeMismatch("prediction vectors must match label length")
    mask = np.ones(y.shape, dtype=bool)
    for p in stack[1:]:
        mask &= p == stack[0]
    fraction = float(np.mean(mask)) if y.size else 1.0
    return ConsensusReport(consensus_fraction=fraction,
                           ceiling_bound=1.0 - fraction,
                           consensus_mask=mask)
