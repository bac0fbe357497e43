"""Cross-dataset nonparametric statistics: Friedman test, Nemenyi critical
difference, pairwise Wilcoxon signed-rank, win matrices, Pareto frontier.

Ranks follow the benchmark convention: 1 is best, ties get the average rank,
so every rank row sums to K(K+1)/2. The Friedman statistic is the classic
chi-square form without tie correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateInput, ShapeMismatch, TooFewPairs, UnsupportedK,
                     ZeroVariance)

# Critical values for the Nemenyi test, Demsar (2006) convention:
# q_alpha = (studentized range at infinite df) / sqrt(2), K = 2..20.
_Q_TABLE = {
    0.05: [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164,
           3.219, 3.268, 3.313, 3.354, 3.391, 3.426, 3.458, 3.489, 3.517,
           3.544],
    0.10: [1.645, 2.052, 2.291, 2.460, 2.589, 2.693, 2.780, 2.855, 2.920,
           2.978, 3.030, 3.077, 3.120, 3.159, 3.196, 3.230, 3.261, 3.291,
           3.319],
}


def _tied_ranks_ascending(values: np.ndarray) -> np.ndarray:
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


@dataclass(frozen=True)
class RankMatrix:
    """Per-dataset method ranks (1 = best, average ties)."""

    ranks: np.ndarray
    method_names: tuple[str, ...]
    dataset_ids: tuple[str, ...]

    @property
    def mean_ranks(self) -> np.ndarray:
        return self.ranks.mean(axis=0)


def rank_table(metric_values: np.ndarray, higher_is_better: bool = True, *,
               method_names=None, dataset_ids=None) -> RankMatrix:
    """Rank an N x K metric table per dataset row."""
    values = np.asarray(metric_values, dtype=np.float64)
    if values.ndim != 2:
        raise ShapeMismatch("metric table must be N x K")
    if not np.all(np.isfinite(values)):
        raise ValueError("metric values must be finite")
    n, k = values.shape
    ranks = np.empty_like(values)
    for i in range(n):
        row = -values[i] if higher_is_better else values[i]
        ranks[i] = _tied_ranks_ascending(row)
    names = tuple(method_names) if method_names else tuple(f"m{j}" for j in range(k))
    ids = tuple(dataset_ids) if dataset_ids else tuple(f"d{i}" for i in range(n))
    return RankMatrix(ranks=ranks, method_names=names, dataset_ids=ids)


# --- chi-square tail via regularized incomplete gamma ----------------------
# Series for P(a, x) when x < a + 1, Lentz continued fraction for Q(a, x)
# otherwise; absolute error well below 1e-10 for the df range used here.

def _gamma_p_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(1000):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0 else 1.0 / tiny
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi2_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if x <= 0.0:
        return 1.0
    a = df / 2.0
    half = x / 2.0
    if half < a + 1.0:
        return max(0.0, 1.0 - _gamma_p_series(a, half))
    return _gamma_q_contfrac(a, half)


def friedman(ranks) -> tuple[float, float]:
    """Friedman chi-square over an N x K rank matrix (or RankMatrix).

    chi2 = 12N/(K(K+1)) * [sum_j R_j^2 - K(K+1)^2/4] with R_j the mean
    ranks; p from the chi-square upper tail with K-1 degrees of freedom.
    """
    r = ranks.ranks if isinstance(ranks, RankMatrix) else np.asarray(ranks, dtype=np.float64)
    if r.ndim != 2:
        raise ShapeMismatch("ranks must be N x K")
    n, k = r.shape
    if n < 2 or k < 2:
        raise DegenerateInput("Friedman needs N >= 2 datasets and K >= 2 methods")
    mean = r.mean(axis=0)
    chi2 = 12.0 * n / (k * (k + 1)) * (float(np.sum(mean**2)) - k * (k + 1) ** 2 / 4.0)
    return chi2, chi2_sf(chi2, k - 1)


def nemenyi_cd(k: int, n: int, alpha: float = 0.05) -> float:
    """Critical difference q_alpha(K) * sqrt(K(K+1)/(6N))."""
    if alpha not in _Q_TABLE:
        raise ValueError("alpha must be 0.05 or 0.10")
    if not 2 <= k <= 20:
        raise UnsupportedK(f"no critical value embedded for K={k}")
    if n < 1:
        raise ValueError("n must be >= 1")
    q = _Q_TABLE[alpha][k - 2]
    return q * math.sqrt(k * (k + 1) / (6.0 * n))


def wilcoxon_signed_rank(x, y, method: str = "auto") -> float:
    """Two-sided Wilcoxon signed-rank p-value for paired samples.

    Zero differences are dropped (Wilcoxon's original treatment); absolute
    differences get average ranks. ``method`` is "exact" (full enumeration
    of sign assignments), "normal" (tie-corrected variance with a 0.5
    continuity correction), or "auto" (exact when <= 12 pairs remain).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeMismatch("paired samples must be equal-length vectors")
    d = x - y
    d = d[d != 0.0]
    n = d.size
    if n < 5:
        raise TooFewPairs(f"{n} non-zero differences; need >= 5")
    ranks = _tied_ranks_ascending(np.abs(d))
    w_plus = float(np.sum(ranks[d > 0]))

    if method not in ("auto", "exact", "normal"):
        raise ValueError("method must be auto, exact or normal")
    if method == "exact" or (method == "auto" and n <= 12):
        return _wilcoxon_exact(ranks, w_plus)
    return _wilcoxon_normal(d, ranks, w_plus)


def _wilcoxon_exact(ranks: np.ndarray, w_obs: float) -> float:
    n = ranks.size
    le = ge = 0
    tol = 1e-9
    for mask in range(1 << n):
        w = 0.0
        m = mask
        j = 0
        while m:
            if m & 1:
                w += ranks[j]
            m >>= 1
            j += 1
        if w <= w_obs + tol:
            le += 1
        if w >= w_obs - tol:
            ge += 1
    return min(1.0, 2.0 * min(le, ge) / (1 << n))


def _wilcoxon_normal(d: np.ndarray, ranks: np.ndarray, w_plus: float) -> float:
    n = d.size
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, counts = np.unique(np.abs(d), return_counts=True)
    var -= float(np.sum(counts.astype(np.float64) ** 3 - counts)) / 48.0
    diff = w_plus - mu
    cc = 0.5 * np.sign(diff)
    z = (diff - cc) / math.sqrt(var)
    return min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))


def win_matrix(metric_values: np.ndarray, higher_is_better: bool = True) -> np.ndarray:
    """Cell (i, j) = percentage of datasets where method i strictly beats j.

    Ties count in neither cell, so (i, j) + (j, i) <= 100; diagonal is 0.
    """
    values = np.asarray(metric_values, dtype=np.float64)
    if values.ndim != 2:
        raise ShapeMismatch("metric table must be N x K")
    if not np.all(np.isfinite(values)):
        raise ValueError("metric values must be finite")
    n, k = values.shape
    out = np.zeros((k, k), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            if higher_is_better:
                wins = np.sum(values[:, i] > values[:, j])
            else:
                wins = np.sum(values[:, i] < values[:, j])
            out[i, j] = 100.0 * wins / n
    return out


def pareto_frontier(points: dict[str, tuple[float, float]]) -> list[str]:
    """Methods not dominated in the (higher accuracy, lower time) ordering.

    m is dominated when some other method has accuracy >= and time <= with
    at least one strict inequality; exact ties on both axes keep both.
    """
    for name, (_, t) in points.items():
        if t <= 0:
            raise ValueError(f"non-positive time for {name!r}")
    names = list(points)
    frontier = []
    for m in names:
        acc_m, time_m = points[m]
        dominated = False
        for o in names:
            if o == m:
                continue
            acc_o, time_o = points[o]
            if acc_o >= acc_m and time_o <= time_m and (acc_o > acc_m or time_o < time_m):
                dominated = True
                break
        if not dominated:
            frontier.append(m)
    return frontier


def spread_gain_correlation(spreads, gains) -> float:
    """Pearson correlation between per-dataset inter-base accuracy spread
    (max - min base accuracy) and ensemble gain (ensemble - best base)."""
    s = np.asarray(spreads, dtype=np.float64)
    g = np.asarray(gains, dtype=np.float64)
    if s.shape != g.shape or s.ndim != 1:
        raise ShapeMismatch("spreads and gains must be equal-length vectors")
    if s.size < 3:
        raise DegenerateInput("need at least 3 datasets")
    sc = s - s.mean()
    gc = g - g.mean()
    denom = math.sqrt(float(np.sum(sc**2)) * float(np.sum(gc**2)))
    if denom == 0.0:
        raise ZeroVariance("a coordinate is constant")
    return float(np.sum(sc * gc) / denom)


@dataclass(frozen=True)
class OracleComparison:
    wins: int
    ties: int
    losses: int
    mean_delta: float

    def to_dict(self) -> dict:
        return {"wins": self.wins, "ties": self.ties, "losses": self.losses,
                "mean_delta": self.mean_delta}


def oracle_comparison(per_dataset_acc: np.ndarray,
                      ensemble_acc: np.ndarray) -> OracleComparison:
    """Ensemble vs the per-dataset best base (the oracle base)."""
    base = np.asarray(per_dataset_acc, dtype=np.float64)
    ens = np.asarray(ensemble_acc, dtype=np.float64)
    if base.ndim != 2 or ens.shape != (base.shape[0],):
        raise ShapeMismatch("need N x K base accuracies and length-N ensemble")
    oracle = base.max(axis=1)
    return OracleComparison(
        wins=int(np.sum(ens > oracle)),
        ties=int(np.sum(ens == oracle)),
        losses=int(np.sum(ens < oracle)),
        mean_delta=float(np.mean(ens - oracle)),
    )


@dataclass(frozen=True)
class StatReport:
    """Cross-dataset report assembled by the harness aggregate step."""

    method_names: tuple[str, ...]
    mean_ranks: dict[str, float]
    friedman_chi2: float
    friedman_p: float
    nemenyi_cd: float
    wilcoxon: dict[str, float]
    win_matrix: np.ndarray
    pareto_set: tuple[str, ...]
    spread_gain_correlation: float | None
    oracle: dict[str, OracleComparison] = field(default_factory=dict)
    spread_gain_by_method: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "method_names": list(self.method_names),
            "mean_ranks": self.mean_ranks,
            "friedman_chi2": self.friedman_chi2,
            "friedman_p": self.friedman_p,
            "nemenyi_cd": self.nemenyi_cd,
            "wilcoxon": self.wilcoxon,
            "win_matrix": self.win_matrix.tolist(),
            "pareto_set": list(self.pareto_set),
            "spread_gain_correlation": self.spread_gain_correlation,
            "spread_gain_by_method": self.spread_gain_by_method,
            "oracle_comparison": {k: v.to_dict() for k, v in self.oracle.items()},
        }
