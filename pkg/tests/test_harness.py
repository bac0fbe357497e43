import json
import sys
from pathlib import Path

import numpy as np
import pytest

from poolbench.combiners import combine_convex, fit_weighted_average
from poolbench.core import SplitSpec, stratified_split
from poolbench.errors import ConfigError, InsufficientOverlap
from poolbench.harness import (RunConfig, aggregate, diversity_from_predictions,
                               ingest_dataset, load_records, run, run_dataset,
                               write_report)
from poolbench.learners import save_file_backed
from poolbench.rng import derive_seed
from poolbench.synth import make_gaussian_mixture

from oracles import oracle_pearson

STUB = Path(__file__).parent / "external_worker_stub.py"


def _toy_config(**overrides):
    base = dict(
        master_seed=11,
        datasets=[{"kind": "synthetic", "id": "s0", "n": 60, "d": 4, "classes": 2}],
        builtin=[{"name": "lin", "learner": "linear"},
                 {"name": "gau", "learner": "gaussian"}],
        strategies=("weighted_average",),
    )
    base.update(overrides)
    return RunConfig(**base)


class TestRunDataset:
    def test_wa_reconstruction_from_cached_matrices(self):
        config = _toy_config()
        ds = ingest_dataset(config, config.datasets[0])
        result = run_dataset(config, ds)
        assert len(result.records) == 3
        assert [r.method for r in result.records] == ["lin", "gau", "weighted_average"]
        assert all(r.error is None for r in result.records)

        # strategy output must be reproducible from the cached matrices alone
        y_val = ds.labels[result.split.val]
        w = fit_weighted_average([m.val_probs for m in result.members], y_val)
        expected = combine_convex([m.test_probs for m in result.members], w)
        from poolbench.metrics import accuracy
        wa_rec = result.records[-1]
        y_te = result.test_labels
        assert wa_rec.bundle.accuracy == accuracy(expected, y_te)

    def test_file_backed_cascade_is_error_record(self, tmp_path):
        ds = make_gaussian_mixture("fbds", n=50, d=3, class_count=2, seed=4)
        config = _toy_config(
            datasets=[{"kind": "synthetic", "id": "fbds", "n": 50, "d": 3,
                       "classes": 2, "seed": 4}],
            builtin=[{"name": "lin", "learner": "linear"}],
            file_backed=[{"name": "frozen", "dir": str(tmp_path)}],
            strategies=("weighted_average", "cascade"),
            base_dir=tmp_path,
        )
        # store matrices matching the split the harness will derive
        ds_seed = derive_seed(config.master_seed, "dataset:fbds")
        split = stratified_split(ds, SplitSpec(seed=derive_seed(ds_seed, "split")))
        rng = np.random.default_rng(0)
        for split_name, idx in (("val", split.val), ("test", split.test)):
            raw = rng.gamma(1.0, 1.0, size=(len(idx), 2))
            save_file_backed(tmp_path / f"fbds__{split_name}.csv",
                             raw / raw.sum(axis=1, keepdims=True),
                             model="frozen", dataset="fbds", split=split_name)
        result = run_dataset(config, ds)
        by_method = {r.method: r for r in result.records}
        assert by_method["frozen"].error is None
        assert by_method["weighted_average"].error is None
        assert "cannot be refit" in by_method["cascade"].error

    def test_rerun_bit_identical_metrics(self):
        config = _toy_config(strategies=("weighted_average", "greedy",
                                         "stacking", "temp_scaled_blend"))
        ds = ingest_dataset(config, config.datasets[0])
        a = run_dataset(config, ds)
        b = run_dataset(config, ds)
        for ra, rb in zip(a.records, b.records):
            assert ra.method == rb.method
            assert ra.bundle.to_dict() | {"fit_seconds": 0, "predict_seconds": 0} \
                == rb.bundle.to_dict() | {"fit_seconds": 0, "predict_seconds": 0}

    def test_external_worker_in_pool(self):
        config = _toy_config(
            builtin=[{"name": "lin", "learner": "linear"}],
            external=[{"name": "stub",
                       "command": [sys.executable, str(STUB), "--adapter", "prior"]}],
        )
        ds = ingest_dataset(config, config.datasets[0])
        result = run_dataset(config, ds)
        by_method = {r.method: r for r in result.records}
        assert by_method["stub"].error is None
        assert by_method["weighted_average"].error is None
        stub_member = [m for m in result.members if m.name == "stub"][0]
        # prior adapter returns constant class-frequency rows
        assert np.all(stub_member.test_probs == stub_member.test_probs[0])

    def test_group_column_fills_wga(self):
        config = _toy_config(datasets=[{"kind": "synthetic", "id": "g0", "n": 80,
                                        "d": 4, "classes": 2, "groups": 3}])
        ds = ingest_dataset(config, config.datasets[0])
        result = run_dataset(config, ds)
        assert all(r.bundle.wga is not None for r in result.records if not r.error)


class TestRunAndPersist:
    def test_run_writes_records_and_predictions(self, tmp_path):
        config = _toy_config(
            datasets=[{"kind": "synthetic", "id": f"s{i}", "n": 60, "d": 4,
                       "classes": 2} for i in range(3)],
            out_dir=tmp_path / "out",
        )
        records = run(config)
        assert len(records) == 3 * 3
        lines = load_records(tmp_path / "out" / "records.jsonl")
        assert len(lines) == 9
        assert all(line["schema"] == 1 for line in lines)
        for i in range(3):
            pred_dir = tmp_path / "out" / "predictions" / f"s{i}"
            assert (pred_dir / "_labels.csv").exists()
            assert (pred_dir / "lin__test.csv").exists()
            assert (pred_dir / "lin__test.csv.json").exists()
        model_file = tmp_path / "out" / "models" / "s0" / "weighted_average.json"
        assert json.loads(model_file.read_text())["schema"] == 1

    def test_run_parallel_matches_serial(self, tmp_path):
        config_a = _toy_config(
            datasets=[{"kind": "synthetic", "id": f"p{i}", "n": 60, "d": 4,
                       "classes": 2} for i in range(2)],
            out_dir=tmp_path / "a")
        config_b = _toy_config(
            datasets=config_a.datasets,
            out_dir=tmp_path / "b")
        serial = run(config_a, workers=1)
        parallel = run(config_b, workers=2)
        for ra, rb in zip(serial, parallel):
            assert ra.method == rb.method
            assert ra.bundle.accuracy == rb.bundle.accuracy
            assert ra.bundle.log_loss == rb.bundle.log_loss

    def test_invalid_config_raises(self, tmp_path):
        config = _toy_config(datasets=[], out_dir=tmp_path)
        with pytest.raises(ConfigError):
            run(config)


def _rec(ds, method, role, acc, seconds=1.0, error=None):
    return {"schema": 1, "dataset_id": ds, "method": method, "role": role,
            "n_test": 10, "timestamp": 0.0, "pool_seconds": 0.0, "error": error,
            "accuracy": acc, "weighted_f1": acc, "roc_auc_ovr": 0.5,
            "log_loss": 0.5, "ece": 0.1, "brier_rel": 0.01, "aurc": 0.1,
            "cov_at_95": 0.5, "wga": None, "fit_seconds": seconds,
            "predict_seconds": 0.0}


class TestAggregate:
    def test_spreadsheet_oracle_mean_ranks(self):
        accs = {"a": [0.9, 0.5, 0.9, 0.2], "b": [0.8, 0.6, 0.9, 0.3],
                "c": [0.7, 0.7, 0.1, 0.4]}
        records = []
        for i, ds in enumerate(["d1", "d2", "d3", "d4"]):
            records.append(_rec(ds, "a", "base", accs["a"][i]))
            records.append(_rec(ds, "b", "base", accs["b"][i]))
            records.append(_rec(ds, "c", "ensemble", accs["c"][i]))
        agg = aggregate(records)
        # hand-computed: a -> (1+3+1.5+3)/4, b -> (2+2+1.5+2)/4, c -> (3+1+3+1)/4
        assert agg.stat_report.mean_ranks["a"] == pytest.approx(2.125)
        assert agg.stat_report.mean_ranks["b"] == pytest.approx(1.875)
        assert agg.stat_report.mean_ranks["c"] == pytest.approx(2.0)

        spreads = [0.1, 0.1, 0.0, 0.1]
        gains = [0.7 - 0.9, 0.7 - 0.6, 0.1 - 0.9, 0.4 - 0.3]
        assert agg.stat_report.spread_gain_by_method["c"] == pytest.approx(
            oracle_pearson(spreads, gains), abs=1e-12)
        oc = agg.stat_report.oracle["c"]
        assert (oc.wins, oc.ties, oc.losses) == (2, 0, 2)

    def test_incomplete_method_flagged_not_ranked(self):
        records = []
        for ds in ("d1", "d2", "d3"):
            records.append(_rec(ds, "a", "base", 0.8))
            records.append(_rec(ds, "b", "base", 0.7))
        records.append(_rec("d1", "c", "ensemble", 0.9))
        records.append(_rec("d2", "c", "ensemble", 0.9))
        records.append(_rec("d3", "c", "ensemble", 0.9, error="boom"))
        agg = aggregate(records)
        assert "c" not in agg.stat_report.method_names
        row = [e for e in agg.leaderboard if e["method"] == "c"][0]
        assert row["in_rank_set"] is False and row["n_datasets"] == 2

    def test_insufficient_overlap(self):
        records = [_rec("d1", "a", "base", 0.5), _rec("d1", "b", "base", 0.6)]
        with pytest.raises(InsufficientOverlap):
            aggregate(records)

    def test_report_files_written(self, tmp_path):
        records = []
        rng = np.random.default_rng(1)
        for ds in ("d1", "d2", "d3", "d4", "d5"):
            for m, role in (("a", "base"), ("b", "base"), ("e", "ensemble")):
                records.append(_rec(ds, m, role, float(rng.random())))
        agg = aggregate(records)
        paths = write_report(agg, tmp_path)
        names = {p.name for p in paths}
        assert names == {"leaderboard.json", "stat_report.json", "cd_diagram.json",
                         "pareto.json", "diversity.json", "win_matrix.csv"}
        stat = json.loads((tmp_path / "stat_report.json").read_text())
        assert set(stat["mean_ranks"]) == {"a", "b", "e"}
        win = (tmp_path / "win_matrix.csv").read_text().splitlines()
        assert win[0] == "method,a,b,e"
        cd = json.loads((tmp_path / "cd_diagram.json").read_text())
        assert cd["cd"] > 0 and len(cd["mean_ranks"]) == 3


class TestDiversityFromPredictions:
    def test_duplicated_model_q_one(self, tmp_path):
        rng = np.random.default_rng(2)
        pred_dir = tmp_path / "predictions"
        for t in range(3):
            d = pred_dir / f"task{t}"
            d.mkdir(parents=True)
            labels = rng.integers(0, 2, size=30)
            np.savetxt(d / "_labels.csv", labels, fmt="%d")
            raw = rng.gamma(1.0, 1.0, size=(30, 2))
            m = raw / raw.sum(axis=1, keepdims=True)
            save_file_backed(d / "m1__test.csv", m, model="m1", dataset=f"task{t}",
                             split="test")
            save_file_backed(d / "m2__test.csv", m, model="m2", dataset=f"task{t}",
                             split="test")
        report = diversity_from_predictions(pred_dir, ["m1", "m2"])
        assert report.mean_q == 1.0

    def test_missing_dir_returns_none(self, tmp_path):
        assert diversity_from_predictions(tmp_path / "nope", ["a", "b"]) is None
