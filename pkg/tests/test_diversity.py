import numpy as np
import pytest

from poolbench.combiners import combine_convex
from poolbench.core import argmax_labels
from poolbench.diversity import (ContingencyTable, cohen_kappa, consensus_report,
                                 contingency, disagreement, pool_diversity,
                                 q_statistic)
from poolbench.errors import DegenerateAgreement, ShapeMismatch
from poolbench.metrics import accuracy

from helpers import correlated_pool, random_hard_preds
from oracles import oracle_contingency, oracle_pair_q


class TestContingency:
    def test_identical_predictors(self):
        y = np.arange(10) % 2
        preds = y.copy()
        preds[6:] = 1 - preds[6:]  # 60% accurate
        t = contingency(preds, preds, y)
        assert (t.a, t.b, t.c, t.d) == (6, 0, 0, 4)

    def test_complementary_predictors(self):
        y = np.zeros(10, dtype=int)
        p1 = np.array([0] * 5 + [1] * 5)
        p2 = 1 - p1
        t = contingency(p1, p2, y)
        assert t.a == 0 and t.d == 0 and t.b == 5 and t.c == 5

    def test_recount_oracle(self):
        rng = np.random.default_rng(0)
        y = rng.integers(0, 3, size=50)
        p1 = random_hard_preds(rng, y, 3, 0.7)
        p2 = random_hard_preds(rng, y, 3, 0.5)
        t = contingency(p1, p2, y)
        assert (t.a, t.b, t.c, t.d) == oracle_contingency(p1, p2, y)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            contingency(np.zeros(3), np.zeros(4), np.zeros(3))


class TestQStatistic:
    def test_no_disagreement_is_one(self):
        assert q_statistic(ContingencyTable(6, 0, 0, 4)) == 1.0

    def test_complementary_is_minus_one(self):
        assert q_statistic(ContingencyTable(0, 5, 5, 0)) == -1.0

    def test_direct_formula(self):
        assert q_statistic(ContingencyTable(4, 1, 1, 4)) == pytest.approx(15 / 17)

    def test_undefined(self):
        assert q_statistic(ContingencyTable(6, 4, 0, 0)) is None

    def test_antisymmetry(self):
        # Q of (a,b,c,d) equals -Q of (b,a,d,c)
        for a, b, c, d in ((4, 1, 2, 5), (3, 3, 2, 2), (1, 2, 3, 4)):
            assert q_statistic(ContingencyTable(a, b, c, d)) == pytest.approx(
                -q_statistic(ContingencyTable(b, a, d, c)))

    def test_swap_symmetry(self):
        # swapping the pair (b <-> c) changes nothing
        assert q_statistic(ContingencyTable(4, 1, 3, 4)) == pytest.approx(
            q_statistic(ContingencyTable(4, 3, 1, 4)))
        assert disagreement(ContingencyTable(4, 1, 3, 4)) == pytest.approx(
            disagreement(ContingencyTable(4, 3, 1, 4)))


class TestKappa:
    def test_perfect_agreement(self):
        assert cohen_kappa(ContingencyTable(4, 0, 0, 4)) == 1.0

    def test_independence_is_zero(self):
        assert cohen_kappa(ContingencyTable(4, 4, 4, 4)) == pytest.approx(0.0)

    def test_degenerate_marginals(self):
        with pytest.raises(DegenerateAgreement):
            cohen_kappa(ContingencyTable(10, 0, 0, 0))


class TestDisagreement:
    def test_identical(self):
        assert disagreement(ContingencyTable(6, 0, 0, 4)) == 0.0

    def test_complementary(self):
        assert disagreement(ContingencyTable(0, 5, 5, 0)) == 1.0

    def test_direct(self):
        assert disagreement(ContingencyTable(4, 1, 1, 4)) == pytest.approx(0.2)


class TestPoolDiversity:
    def test_identical_models_mean_one(self):
        rng = np.random.default_rng(1)
        task_preds, task_labels = [], []
        for t in range(3):
            y = rng.integers(0, 2, size=20)
            p = random_hard_preds(rng, y, 2, 0.7)  # some right, some wrong
            task_preds.append([p, p.copy()])
            task_labels.append(y)
        report = pool_diversity(task_preds, task_labels)
        assert report.mean_q == 1.0
        assert report.per_pair_q[0, 1] == 1.0
        assert np.isnan(report.per_pair_q[0, 0])

    def test_complementary_pair_hand_aggregation(self):
        y = np.zeros(10, dtype=int)
        a = np.array([0] * 5 + [1] * 5)
        b = 1 - a
        c = a.copy()
        report = pool_diversity([[a, b, c]], [y])
        # pairs: (a,b) -> -1, (a,c) -> 1, (b,c) -> -1
        expected = (-1.0 + 1.0 - 1.0) / 3
        assert report.mean_q == pytest.approx(expected)
        assert report.per_pair_q[0, 1] == -1.0
        assert report.per_pair_q[0, 2] == 1.0

    def test_undefined_pair_recorded_and_excluded(self):
        y = np.zeros(8, dtype=int)
        perfect = np.zeros(8, dtype=int)  # always right: pairs with it lack d
        mixed_a = np.array([0, 0, 0, 0, 1, 1, 0, 0])
        mixed_b = np.array([0, 0, 0, 0, 1, 0, 1, 0])
        report = pool_diversity([[perfect, perfect.copy(), mixed_a, mixed_b]], [y])
        assert (0, 1) in report.undefined_pairs
        assert "0,1" in report.undefined_pair_tasks
        # mixed pair shares an error (a=5, b=1, c=1, d=1) so Q is defined
        assert not np.isnan(report.per_pair_q[2, 3])
        assert np.isnan(report.per_pair_q[0, 2])  # perfect-vs-mixed lacks d

    def test_oracle_equivalence_random(self):
        rng = np.random.default_rng(7)
        k, tasks = 4, 5
        task_preds, task_labels = [], []
        for t in range(tasks):
            y = rng.integers(0, 3, size=30)
            task_preds.append([random_hard_preds(rng, y, 3, acc)
                               for acc in (0.9, 0.7, 0.5, 0.3)])
            task_labels.append(y)
        report = pool_diversity(task_preds, task_labels)
        for i in range(k):
            for j in range(i + 1, k):
                qs = [oracle_pair_q(task_preds[t][i], task_preds[t][j], task_labels[t])
                      for t in range(tasks)]
                qs = [q for q in qs if q is not None]
                assert report.per_pair_q[i, j] == pytest.approx(
                    float(np.mean(qs)), abs=1e-12)


class TestConsensus:
    def test_identical_models(self):
        y = np.arange(10) % 3
        r = consensus_report([y, y.copy(), y.copy()], y)
        assert r.consensus_fraction == 1.0 and r.ceiling_bound == 0.0

    def test_three_of_ten_differ(self):
        y = np.zeros(10, dtype=int)
        a = np.zeros(10, dtype=int)
        b = a.copy()
        b[:3] = 1
        r = consensus_report([a, b], y)
        assert r.consensus_fraction == pytest.approx(0.7)
        assert r.ceiling_bound == pytest.approx(0.3)
        assert int(r.consensus_mask.sum()) == 7

    def test_single_model_vacuous(self):
        y = np.zeros(5, dtype=int)
        assert consensus_report([y], y).consensus_fraction == 1.0


class TestCeilingProposition:
    """Consensus rows force the convex argmax; gaps bounded by 1 - fraction."""

    def test_random_pools(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            k = int(rng.integers(2, 7))
            c = int(rng.integers(2, 6))
            bases, labels = correlated_pool(rng, k, c, 100)
            hard = [argmax_labels(b) for b in bases]
            report = consensus_report(hard, labels)
            raw = rng.gamma(1.0, 1.0, size=k)
            w = raw / raw.sum()
            combined = combine_convex(bases, w)
            mask = report.consensus_mask
            if mask.any():
                assert np.array_equal(argmax_labels(combined)[mask], hard[0][mask])
            ens_acc = accuracy(combined, labels)
            for b in bases:
                assert abs(ens_acc - accuracy(b, labels)) <= report.ceiling_bound + 1e-12
