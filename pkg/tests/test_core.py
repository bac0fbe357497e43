import numpy as np
import pytest

from poolbench.core import (Dataset, FoldAssignment, SplitSpec, argmax_labels,
                            assign_folds, check_prob_matrix, check_weights,
                            clip_probs, renormalize_rows, stratified_split)
from poolbench.errors import ShapeMismatch, TooFewSamples
from poolbench.rng import SplitMix64, derive_seed
from poolbench.synth import make_gaussian_mixture


def _dataset_from_labels(labels, d=3, seed=0):
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((labels.size, d))
    return Dataset(id="t", features=X, labels=labels,
                   class_count=int(labels.max()) + 1)


class TestSplitMix:
    def test_stream_deterministic(self):
        a = [SplitMix64(42).next_u64() for _ in range(5)]
        b = [SplitMix64(42).next_u64() for _ in range(5)]
        assert a == b

    def test_below_unbiased_range(self):
        rng = SplitMix64(1)
        draws = [rng.below(7) for _ in range(2000)]
        assert min(draws) == 0 and max(draws) == 6

    def test_derive_seed_tags_differ(self):
        assert derive_seed(5, "a") != derive_seed(5, "b")
        assert derive_seed(5, "a") == derive_seed(5, "a")
        assert derive_seed(5, "a") != 0


class TestDataset:
    def test_rejects_nonfinite(self):
        X = np.array([[1.0, np.inf], [0.0, 1.0]])
        with pytest.raises(ValueError):
            Dataset(id="x", features=X, labels=np.array([0, 1]), class_count=2)

    def test_rejects_missing_class(self):
        with pytest.raises(ValueError, match="never observed"):
            _dataset_from_labels([0, 0, 2, 2])  # class 1 absent

    def test_rejects_label_out_of_range(self):
        X = np.zeros((2, 2))
        with pytest.raises(ValueError):
            Dataset(id="x", features=X, labels=np.array([0, 2]), class_count=2)


class TestStratifiedSplit:
    def test_balanced_forced_arithmetic(self):
        # n=100, 2 balanced classes: 20/20/60 with a 50/50 class balance each
        ds = _dataset_from_labels([0] * 50 + [1] * 50)
        sp = stratified_split(ds, SplitSpec(seed=7))
        assert (len(sp.test), len(sp.val), len(sp.train)) == (20, 20, 60)
        for part in (sp.train, sp.val, sp.test):
            counts = np.bincount(ds.labels[part], minlength=2)
            assert counts[0] == counts[1]

    def test_singleton_class_routed_to_train(self):
        ds = _dataset_from_labels([0] * 9 + [1])
        sp = stratified_split(ds, SplitSpec(seed=3))
        assert 9 in sp.train
        assert any("singleton" in w for w in sp.warnings)
        assert np.unique(ds.labels[sp.train]).size == 2

    def test_proportions_recount_oracle(self):
        # n=50, 3 classes sized {20,20,10}: recount per-class proportions
        labels = [0] * 20 + [1] * 20 + [2] * 10
        ds = _dataset_from_labels(labels)
        sp = stratified_split(ds, SplitSpec(seed=3))
        everything = np.sort(np.concatenate([sp.train, sp.val, sp.test]))
        assert np.array_equal(everything, np.arange(50))  # disjoint + exhaustive
        spec = SplitSpec(seed=3)
        for c, n_c in ((0, 20), (1, 20), (2, 10)):
            in_test = int(np.sum(ds.labels[sp.test] == c))
            in_val = int(np.sum(ds.labels[sp.val] == c))
            assert abs(in_test - n_c * spec.test_fraction) <= 1
            rest = n_c - in_test
            assert abs(in_val - rest * spec.val_fraction_of_train) <= 1

    def test_deterministic_and_seed_sensitive(self):
        ds = make_gaussian_mixture("d", n=90, d=4, class_count=3, seed=5)
        a = stratified_split(ds, SplitSpec(seed=11))
        b = stratified_split(ds, SplitSpec(seed=11))
        c = stratified_split(ds, SplitSpec(seed=12))
        assert np.array_equal(a.train, b.train)
        assert np.array_equal(a.val, b.val)
        assert np.array_equal(a.test, b.test)
        assert not np.array_equal(a.train, c.train)

    def test_fraction_validation(self):
        with pytest.raises(ValueError):
            SplitSpec(seed=1, test_fraction=0.0)
        with pytest.raises(ValueError):
            SplitSpec(seed=1, val_fraction_of_train=1.0)


class TestAssignFolds:
    def test_one_per_class_per_fold(self):
        labels = np.array([0] * 5 + [1] * 5)
        fa = assign_folds(np.arange(10), labels, 5, seed=2)
        for f in range(5):
            members = labels[fa.fold_of_row == f]
            assert np.array_equal(np.sort(members), np.array([0, 1]))

    def test_nine_rows_three_folds(self):
        fa = assign_folds(np.arange(9), np.zeros(9, dtype=int), 3, seed=0)
        assert np.bincount(fa.fold_of_row).tolist() == [3, 3, 3]

    def test_recount_oracle_stratified(self):
        labels = np.array([0] * 7 + [1] * 4)
        fa = assign_folds(np.arange(11), labels, 3, seed=1)
        sizes = np.bincount(fa.fold_of_row, minlength=3)
        assert sizes.max() - sizes.min() <= 1
        for c in (0, 1):
            per_class = np.bincount(fa.fold_of_row[labels == c], minlength=3)
            assert per_class.max() - per_class.min() <= 1

    def test_union_and_determinism(self):
        labels = np.array([0, 1, 2] * 7)
        a = assign_folds(np.arange(21), labels, 4, seed=9)
        b = assign_folds(np.arange(21), labels, 4, seed=9)
        assert np.array_equal(a.fold_of_row, b.fold_of_row)
        assert set(a.fold_of_row.tolist()) == {0, 1, 2, 3}

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            assign_folds(np.arange(2), np.array([0, 1]), 3, seed=0)

    def test_rejects_empty_fold_assignment(self):
        with pytest.raises(ValueError):
            FoldAssignment(fold_of_row=np.zeros(4, dtype=int), fold_count=2)


class TestProbHelpers:
    def test_check_prob_matrix(self):
        check_prob_matrix(np.array([[0.5, 0.5], [1.0, 0.0]]))
        with pytest.raises(ValueError):
            check_prob_matrix(np.array([[0.7, 0.7]]))
        with pytest.raises(ValueError):
            check_prob_matrix(np.array([[-0.1, 1.1]]))
        with pytest.raises(ShapeMismatch):
            check_prob_matrix(np.array([0.5, 0.5]))

    def test_renormalize_after_arithmetic(self):
        rng = np.random.default_rng(0)
        p = rng.gamma(1.0, 1.0, size=(40, 4))
        p = renormalize_rows(p)
        mangled = renormalize_rows(p * 1.37 + 1e-4)
        assert np.max(np.abs(mangled.sum(axis=1) - 1.0)) <= 1e-9

    def test_clip_probs_handles_zeros(self):
        p = clip_probs(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert p.min() > 0
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)

    def test_weights_validation(self):
        check_weights(np.array([0.25, 0.75]))
        with pytest.raises(ValueError):
            check_weights(np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            check_weights(np.array([-0.1, 1.1]))

    def test_argmax_tie_break_lowest(self):
        p = np.array([[0.5, 0.5], [0.2, 0.2]])
        assert argmax_labels(p).tolist() == [0, 0]
