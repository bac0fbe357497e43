import json

import pytest

from poolbench.cli import main


@pytest.fixture
def demo_config(tmp_path):
    cfg = {
        "schema": 1,
        "master_seed": 3,
        "out_dir": "out",
        "datasets": [
            {"kind": "synthetic", "id": f"s{i}", "n": 60, "d": 4, "classes": 2}
            for i in range(3)
        ],
        "pool": {"builtin": [
            {"name": "lin", "learner": "linear"},
            {"name": "gau", "learner": "gaussian"},
            {"name": "knn", "learner": "knn"},
        ]},
        "strategies": ["weighted_average", "greedy", "temp_scaled_blend"],
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_validate_ok(demo_config, capsys):
    assert main(["validate", "--config", str(demo_config)]) == 0
    assert "config ok" in capsys.readouterr().out


def test_validate_broken(tmp_path, capsys):
    cfg = {"master_seed": 1, "out_dir": "o", "datasets": [],
           "pool": {"builtin": [{"name": "x", "learner": "nope"}]},
           "strategies": ["bogus"]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert main(["validate", "--config", str(path)]) == 1
    out = capsys.readouterr().out
    assert "no datasets" in out
    assert "unknown builtin learner" in out
    assert "unknown strategy" in out


def test_run_report_diversity_cycle(demo_config, tmp_path, capsys):
    assert main(["run", "--config", str(demo_config)]) == 0
    records = tmp_path / "out" / "records.jsonl"
    assert records.exists()

    assert main(["report", "--records", str(records),
                 "--out", str(tmp_path / "report")]) == 0
    for name in ("leaderboard.json", "stat_report.json", "cd_diagram.json",
                 "pareto.json", "diversity.json", "win_matrix.csv"):
        assert (tmp_path / "report" / name).exists(), name
    stat = json.loads((tmp_path / "report" / "stat_report.json").read_text())
    assert len(stat["mean_ranks"]) == 6  # 3 bases + 3 strategies
    diversity = json.loads((tmp_path / "report" / "diversity.json").read_text())
    assert diversity["pool"]["model_names"] == ["gau", "knn", "lin"]

    assert main(["diversity", "--records", str(records)]) == 0
    assert (tmp_path / "out" / "diversity.json").exists()


def test_run_rejects_invalid_config(tmp_path, capsys):
    cfg = {"master_seed": 1, "out_dir": "o", "datasets": [], "pool": {}}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(path)]) == 2
    assert "error:" in capsys.readouterr().err
