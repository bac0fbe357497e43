"""Experiment orchestration: per-dataset runs, record persistence, aggregation.

Per dataset the protocol is one stratified 80/20 train/test split, a 75/25
train/validation split inside train, one fit per base on the inner train
rows, and cached base validation/test predictions that every strategy
consumes. Strategy records report combiner-only fit/predict seconds plus a
separate pool_seconds field holding the cached base cost they consumed; the
Pareto frontier uses the sum.

Per-method failures become error records; the run continues.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import combiners, stats
from .core import Dataset, SplitIndices, SplitSpec, assign_folds, stratified_split
from .diversity import DiversityReport, consensus_report, pool_diversity
from .errors import (ConfigError, InsufficientOverlap, PoolbenchError,
                     RefitUnsupported, ShapeMismatch, TooFewPairs, ZeroVariance)
from .ingest import load_csv_dataset
from .learners import (BUILTIN_LEARNERS, BaseModel, FileBackedPredictor,
                       builtin_model, oof_predict, save_file_backed)
from .metrics import MetricBundle, accuracy, compute_bundle
from .rng import derive_seed
from .synth import make_gaussian_mixture
from .wire import external_model, resolve_worker_argv

STRATEGY_NAMES = ("weighted_average", "greedy", "stacking", "temp_scaled_blend",
                  "cascade", "seed_ensemble")
RECORD_SCHEMA = 1


@dataclass(frozen=True)
class RunRecord:
    dataset_id: str
    method: str
    role: str  # "base" or "ensemble"
    n_test: int
    timestamp: float
    bundle: MetricBundle | None
    pool_seconds: float = 0.0
    error: str | None = None

    def to_dict(self) -> dict:
        out = {"schema": RECORD_SCHEMA, "dataset_id": self.dataset_id,
               "method": self.method, "role": self.role, "n_test": self.n_test,
               "timestamp": self.timestamp, "pool_seconds": self.pool_seconds,
               "error": self.error}
        if self.bundle is not None:
            out.update(self.bundle.to_dict())
        return out


@dataclass
class RunConfig:
    master_seed: int
    datasets: list[dict]
    builtin: list[dict] = field(default_factory=list)
    file_backed: list[dict] = field(default_factory=list)
    external: list[dict] = field(default_factory=list)
    strategies: tuple[str, ...] = STRATEGY_NAMES
    stacking_folds: int = 5
    cascade_folds: int = 3
    seed_ensemble_seeds: int = 3
    greedy_iterations: int = 50
    out_dir: Path = Path("poolbench_run")
    base_dir: Path = Path(".")

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        raw = json.loads(path.read_text())
        pool = raw.get("pool", {})
        folds = raw.get("folds", {})
        base_dir = path.parent
        out_dir = Path(raw.get("out_dir", "poolbench_run"))
        if not out_dir.is_absolute():
            out_dir = base_dir / out_dir
        return cls(
            master_seed=int(raw["master_seed"]),
            datasets=list(raw.get("datasets", [])),
            builtin=list(pool.get("builtin", [])),
            file_backed=list(pool.get("file_backed", [])),
            external=list(pool.get("external", [])),
            strategies=tuple(raw.get("strategies", STRATEGY_NAMES)),
            stacking_folds=int(folds.get("stacking", 5)),
            cascade_folds=int(folds.get("cascade", 3)),
            seed_ensemble_seeds=int(raw.get("seed_ensemble_seeds", 3)),
            greedy_iterations=int(raw.get("greedy_iterations", 50)),
            out_dir=out_dir,
            base_dir=base_dir,
        )

    def pool_size(self) -> int:
        return len(self.builtin) + len(self.file_backed) + len(self.external)

    def validate(self) -> list[str]:
        """Config lint; returns a list of human-readable problems."""
        problems = []
        if not self.datasets:
            problems.append("no datasets configured")
        if self.pool_size() < 2:
            problems.append("need at least two base models in the pool")
        for entry in self.datasets:
            kind = entry.get("kind", "csv")
            if kind == "csv":
                p = self._resolve(entry.get("path", ""))
                if not p.exists():
                    problems.append(f"dataset file missing: {p}")
                if not entry.get("target"):
                    problems.append(f"dataset {entry.get('id', p.name)}: no target column")
            elif kind == "synthetic":
                if not entry.get("id"):
                    problems.append("synthetic dataset without an id")
            else:
                problems.append(f"unknown dataset kind {kind!r}")
        names = []
        for spec in self.builtin:
            names.append(spec.get("name"))
            if spec.get("learner") not in BUILTIN_LEARNERS:
                problems.append(f"unknown builtin learner {spec.get('learner')!r}")
        for spec in self.file_backed:
            names.append(spec.get("name"))
            d = self._resolve(spec.get("dir", ""))
            if not d.is_dir():
                problems.append(f"file-backed prediction dir missing: {d}")
        for spec in self.external:
            names.append(spec.get("name"))
            if not spec.get("command"):
                problems.append(f"external model {spec.get('name')!r} has no command")
        if len(set(names)) != len(names):
            problems.append("pool member names must be unique")
        for s in self.strategies:
            if s not in STRATEGY_NAMES:
                problems.append(f"unknown strategy {s!r}")
        if self.stacking_folds < 2 or self.cascade_folds < 2:
            problems.append("fold counts must be >= 2")
        return problems

    def _resolve(self, p: str | Path) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def ingest_dataset(config: RunConfig, entry: dict) -> Dataset:
    kind = entry.get("kind", "csv")
    if kind == "csv":
        return load_csv_dataset(
            config._resolve(entry["path"]), entry["target"],
            dataset_id=entry.get("id"), group=entry.get("group"),
            impute_median=bool(entry.get("impute_median", False)))
    if kind == "synthetic":
        seed = entry.get("seed")
        if seed is None:
            seed = derive_seed(config.master_seed, f"synthetic:{entry['id']}")
        return make_gaussian_mixture(
            entry["id"], n=int(entry.get("n", 300)), d=int(entry.get("d", 8)),
            class_count=int(entry.get("classes", 2)), seed=int(seed),
            class_sep=float(entry.get("class_sep", 2.0)),
            group_count=entry.get("groups"))
    raise ConfigError(f"unknown dataset kind {kind!r}")


@dataclass
class PoolMember:
    """One cached pool member: handle (None for file-backed), val and test
    prediction matrices, and the wall-clock cost of producing them."""

    name: str
    kind: str
    handle: BaseModel | None
    val_probs: np.ndarray
    test_probs: np.ndarray
    fit_seconds: float
    predict_seconds: float

    @property
    def supports_refit(self) -> bool:
        return self.handle is not None and self.handle.supports_refit


@dataclass
class DatasetRun:
    dataset_id: str
    records: list[RunRecord]
    split: SplitIndices
    members: list[PoolMember]
    test_labels: np.ndarray
    test_groups: np.ndarray | None
    manifests: dict[str, dict] = field(default_factory=dict)


def _build_handles(config: RunConfig, dataset: Dataset, ds_seed: int) -> list[tuple[str, str, object]]:
    """(name, kind, handle-or-spec) in config order; file-backed stay specs."""
    out: list[tuple[str, str, object]] = []
    for spec in config.builtin:
        name = spec["name"]
        cfg_seed = int(spec.get("seed", 0))
        # decorrelate perturbed bases across datasets while keeping reruns identical
        seed = 0 if cfg_seed == 0 else derive_seed(ds_seed, f"base:{name}:{cfg_seed}")
        out.append((name, "builtin", builtin_model(name, spec["learner"], seed=seed)))
    for spec in config.file_backed:
        out.append((spec["name"], "file_backed", spec))
    for spec in config.external:
        argv = resolve_worker_argv(spec["command"], config.base_dir)
        out.append((spec["name"], "external",
                    external_model(spec["name"], argv,
                                   seed=int(spec.get("seed", 0)))))
    return out


def _load_file_backed_split(config: RunConfig, spec: dict, dataset_id: str,
                            split: str, expect_rows: int) -> np.ndarray:
    path = config._resolve(spec["dir"]) / f"{dataset_id}__{split}.csv"
    pred = FileBackedPredictor.load(path)
    if pred.matrix.shape[0] != expect_rows:
        raise ShapeMismatch(
            f"{path} has {pred.matrix.shape[0]} rows, split needs {expect_rows}")
    return pred.matrix


def run_dataset(config: RunConfig, dataset: Dataset) -> DatasetRun:
    """Run every base and every enabled strategy on one dataset."""
    ds_seed = derive_seed(config.master_seed, f"dataset:{dataset.id}")
    split = stratified_split(dataset, SplitSpec(seed=derive_seed(ds_seed, "split")))
    X, y = dataset.features, dataset.labels
    X_tr, y_tr = X[split.train], y[split.train]
    X_val, y_val = X[split.val], y[split.val]
    X_te, y_te = X[split.test], y[split.test]
    groups_te = None
    if dataset.group_column is not None:
        groups_te = X_te[:, dataset.group_column]
    C = dataset.class_count

    records: list[RunRecord] = []
    manifests: dict[str, dict] = {}
    members: list[PoolMember] = []
    pool_ok = True
    handles = _build_handles(config, dataset, ds_seed)
    for name, kind, obj in handles:
        try:
            if kind == "file_backed":
                val_m = _load_file_backed_split(config, obj, dataset.id, "val",
                                                len(split.val))
                test_m = _load_file_backed_split(config, obj, dataset.id, "test",
                                                 len(split.test))
                member = PoolMember(name, kind, None, val_m, test_m, 0.0, 0.0)
            else:
                handle: BaseModel = obj
                handle.fit(X_tr, y_tr, class_count=C)
                val_m = handle.predict_proba(X_val)
                test_m = handle.predict_proba(X_te)
                member = PoolMember(name, kind, handle, val_m, test_m,
                                    handle.fit_seconds, handle.predict_seconds)
            members.append(member)
            bundle = compute_bundle(member.test_probs, y_te, groups=groups_te,
                                    fit_seconds=member.fit_seconds,
                                    predict_seconds=member.predict_seconds)
            records.append(RunRecord(dataset.id, name, "base", len(split.test),
                                     time.time(), bundle))
        except (PoolbenchError, OSError, ValueError) as exc:
            pool_ok = False
            records.append(RunRecord(dataset.id, name, "base", len(split.test),
                                     time.time(), None, error=str(exc)))

    pool_seconds = sum(m.fit_seconds + m.predict_seconds for m in members)
    val_mats = [m.val_probs for m in members]
    test_mats = [m.test_probs for m in members]

    def strategy_record(method: str, fn) -> None:
        if not pool_ok:
            records.append(RunRecord(dataset.id, method, "ensemble",
                                     len(split.test), time.time(), None,
                                     pool_seconds=pool_seconds,
                                     error="base pool incomplete"))
            return
        try:
            t0 = time.perf_counter()
            test_pred, manifest = fn()
            elapsed = time.perf_counter() - t0
            bundle = compute_bundle(test_pred, y_te, groups=groups_te,
                                    fit_seconds=elapsed, predict_seconds=0.0)
            manifests[method] = manifest
            records.append(RunRecord(dataset.id, method, "ensemble",
                                     len(split.test), time.time(), bundle,
                                     pool_seconds=pool_seconds))
        except (PoolbenchError, ValueError) as exc:
            records.append(RunRecord(dataset.id, method, "ensemble",
                                     len(split.test), time.time(), None,
                                     pool_seconds=pool_seconds, error=str(exc)))

    def refittable_handles() -> list[BaseModel]:
        handles = []
        for m in members:
            if m.handle is None:
                raise RefitUnsupported(f"{m.name} (file_backed) cannot be refit")
            handles.append(m.handle)
        return handles

    def _wa():
        w = combiners.fit_weighted_average(val_mats, y_val)
        pred = combiners.combine_convex(test_mats, w)
        return pred, {"schema": 1, "kind": "weighted_average",
                      "base_names": [m.name for m in members],
                      "weights": w.tolist()}

    def _greedy():
        sel = combiners.fit_greedy_selection(
            val_mats, y_val, combiners.GreedyConfig(config.greedy_iterations))
        pred = combiners.combine_convex(test_mats, sel.weights)
        manifest = sel.to_manifest()
        manifest["base_names"] = [m.name for m in members]
        return pred, manifest

    def _stacking():
        folds = assign_folds(np.arange(y_tr.size), y_tr, config.stacking_folds,
                             derive_seed(ds_seed, "stacking-oof"))
        oof = [oof_predict(h, X_tr, y_tr, folds, C) for h in refittable_handles()]
        model = combiners.fit_stacking(oof, y_tr)
        return combiners.predict_stacking(model, test_mats), model.to_manifest()

    def _temp():
        temps = combiners.fit_temperatures(val_mats, y_val)
        pred = combiners.temp_scaled_blend(test_mats, temps)
        manifest = temps.to_manifest()
        manifest["base_names"] = [m.name for m in members]
        return pred, manifest

    def _cascade():
        model = combiners.fit_cascade(
            refittable_handles(), X_tr, y_tr, X_val, y_val, val_mats,
            combiners.CascadeConfig(oof_folds=config.cascade_folds,
                                    final_selection_iterations=config.greedy_iterations),
            class_count=C, seed=derive_seed(ds_seed, "cascade"))
        return model.predict_proba(X_te, test_mats), model.to_manifest()

    def _seed_ensemble():
        model = combiners.fit_seed_ensemble(
            refittable_handles(), X_tr, y_tr, X_val, y_val,
            combiners.SeedEnsembleConfig(config.seed_ensemble_seeds),
            class_count=C, seed=derive_seed(ds_seed, "seed-ensemble"))
        return model.predict_proba(X_te), model.to_manifest()

    runners = {"weighted_average": _wa, "greedy": _greedy, "stacking": _stacking,
               "temp_scaled_blend": _temp, "cascade": _cascade,
               "seed_ensemble": _seed_ensemble}
    try:
        for method in config.strategies:
            strategy_record(method, runners[method])
    finally:
        # workers live for one dataset; every handle of an external member
        # shares its client, so one shutdown suffices
        for _, kind, obj in handles:
            if kind == "external":
                obj.impl.client.shutdown()

    return DatasetRun(dataset_id=dataset.id, records=records, split=split,
                      members=members, test_labels=y_te, test_groups=groups_te,
                      manifests=manifests)


@dataclass
class DatasetRunSlim:
    """Picklable slice of a DatasetRun: what persistence and reporting need."""

    dataset_id: str
    records: list[RunRecord]
    member_names: list[str]
    member_test_probs: list[np.ndarray]
    test_labels: np.ndarray
    manifests: dict[str, dict]


def _slim(result: DatasetRun) -> DatasetRunSlim:
    return DatasetRunSlim(
        dataset_id=result.dataset_id,
        records=result.records,
        member_names=[m.name for m in result.members],
        member_test_probs=[m.test_probs for m in result.members],
        test_labels=result.test_labels,
        manifests=result.manifests,
    )


def _persist_dataset_run(out_dir: Path, result: DatasetRunSlim) -> None:
    pred_dir = out_dir / "predictions" / result.dataset_id
    pred_dir.mkdir(parents=True, exist_ok=True)
    np.savetxt(pred_dir / "_labels.csv", result.test_labels, fmt="%d")
    for name, probs in zip(result.member_names, result.member_test_probs):
        save_file_backed(pred_dir / f"{name}__test.csv", probs,
                         model=name, dataset=result.dataset_id, split="test")
    model_dir = out_dir / "models" / result.dataset_id
    if result.manifests:
        model_dir.mkdir(parents=True, exist_ok=True)
        for method, manifest in result.manifests.items():
            (model_dir / f"{method}.json").write_text(json.dumps(manifest, indent=2))


def _run_entry(config: RunConfig, entry: dict) -> DatasetRunSlim:
    dataset = ingest_dataset(config, entry)
    return _slim(run_dataset(config, dataset))


def run(config: RunConfig, workers: int = 1) -> list[RunRecord]:
    """Execute the whole benchmark and write records.jsonl plus artifacts."""
    problems = config.validate()
    if problems:
        raise ConfigError("; ".join(problems))
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs: list[DatasetRunSlim] = []
    if workers <= 1 or len(config.datasets) <= 1:
        for entry in config.datasets:
            runs.append(_run_entry(config, entry))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_entry, config, e) for e in config.datasets]
            runs = [f.result() for f in futures]

    records: list[RunRecord] = []
    with (out_dir / "records.jsonl").open("w") as fh:
        for r in runs:
            _persist_dataset_run(out_dir, r)
            for rec in r.records:
                records.append(rec)
                fh.write(json.dumps(rec.to_dict()) + "\n")
    return records


# --- aggregation ------------------------------------------------------------

def load_records(path: str | Path) -> list[dict]:
    records = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def diversity_from_predictions(predictions_dir: str | Path,
                               base_names: list[str]) -> DiversityReport | None:
    """Pool diversity of the base models from a run's prediction store."""
    predictions_dir = Path(predictions_dir)
    task_preds, task_labels = [], []
    if not predictions_dir.is_dir():
        return None
    for ds_dir in sorted(p for p in predictions_dir.iterdir() if p.is_dir()):
        labels_path = ds_dir / "_labels.csv"
        if not labels_path.exists():
            continue
        labels = np.loadtxt(labels_path, dtype=np.int64, ndmin=1)
        preds = []
        complete = True
        for name in base_names:
            csv_path = ds_dir / f"{name}__test.csv"
            if not csv_path.exists():
                complete = False
                break
            matrix = FileBackedPredictor.load(csv_path).matrix
            preds.append(np.argmax(matrix, axis=1))
        if complete and preds:
            task_preds.append(preds)
            task_labels.append(labels)
    if not task_preds or len(base_names) < 2:
        return None
    return pool_diversity(task_preds, task_labels, model_names=base_names)


def consensus_from_predictions(predictions_dir: str | Path,
                               base_names: list[str]) -> dict[str, dict]:
    """Per-task consensus fraction and ceiling bound of the base pool."""
    predictions_dir = Path(predictions_dir)
    out: dict[str, dict] = {}
    if not predictions_dir.is_dir():
        return out
    for ds_dir in sorted(p for p in predictions_dir.iterdir() if p.is_dir()):
        labels_path = ds_dir / "_labels.csv"
        if not labels_path.exists():
            continue
        labels = np.loadtxt(labels_path, dtype=np.int64, ndmin=1)
        preds = []
        for name in base_names:
            csv_path = ds_dir / f"{name}__test.csv"
            if not csv_path.exists():
                break
            preds.append(np.argmax(FileBackedPredictor.load(csv_path).matrix, axis=1))
        if len(preds) == len(base_names) and preds:
            out[ds_dir.name] = consensus_report(preds, labels).to_dict()
    return out


@dataclass
class AggregateResult:
    stat_report: stats.StatReport
    leaderboard: list[dict]
    diversity: DiversityReport | None
    consensus: dict[str, dict]
    cd_diagram: dict
    pareto: dict
    win_csv: str


def _total_seconds(rec: dict) -> float:
    return (rec.get("pool_seconds", 0.0) + rec.get("fit_seconds", 0.0)
            + rec.get("predict_seconds", 0.0))


def aggregate(records: list[dict], *, alpha: float = 0.05,
              predictions_dir: str | Path | None = None) -> AggregateResult:
    """Build the cross-dataset report from run records.

    Rank-based statistics include only methods that completed every dataset
    (the intersection rule); other methods stay on the leaderboard with a
    flag. Needs at least two datasets and two rankable methods.
    """
    ok = [r for r in records if not r.get("error")]
    datasets = sorted({r["dataset_id"] for r in records})
    methods = sorted({r["method"] for r in ok})
    by_cell = {(r["dataset_id"], r["method"]): r for r in ok}
    roles = {r["method"]: r["role"] for r in ok}

    rank_methods = [m for m in methods
                    if all((d, m) in by_cell for d in datasets)]
    if len(datasets) < 2 or len(rank_methods) < 2:
        raise InsufficientOverlap(
            f"{len(datasets)} datasets, {len(rank_methods)} complete methods")

    acc = np.array([[by_cell[(d, m)]["accuracy"] for m in rank_methods]
                    for d in datasets])
    rank_matrix = stats.rank_table(acc, higher_is_better=True,
                                   method_names=rank_methods, dataset_ids=datasets)
    chi2, p = stats.friedman(rank_matrix)
    cd = stats.nemenyi_cd(len(rank_methods), len(datasets), alpha=alpha)
    mean_ranks = {m: float(v) for m, v in zip(rank_methods, rank_matrix.mean_ranks)}

    wilcoxon: dict[str, float | None] = {}
    for i, a in enumerate(rank_methods):
        for b in rank_methods[i + 1:]:
            try:
                wilcoxon[f"{a}|{b}"] = stats.wilcoxon_signed_rank(acc[:, rank_methods.index(a)],
                                                                  acc[:, rank_methods.index(b)])
            except TooFewPairs:
                wilcoxon[f"{a}|{b}"] = None

    win = stats.win_matrix(acc, higher_is_better=True)
    points = {m: (float(acc[:, j].mean()),
                  max(float(np.mean([_total_seconds(by_cell[(d, m)]) for d in datasets])),
                      1e-9))
              for j, m in enumerate(rank_methods)}
    pareto_set = stats.pareto_frontier(points)

    base_methods = [m for m in rank_methods if roles.get(m) == "base"]
    ens_methods = [m for m in rank_methods if roles.get(m) == "ensemble"]
    spread_corr = None
    spread_by_method: dict[str, float] = {}
    oracle: dict[str, stats.OracleComparison] = {}
    if len(base_methods) >= 2 and ens_methods:
        base_acc = np.array([[by_cell[(d, m)]["accuracy"] for m in base_methods]
                             for d in datasets])
        spreads = base_acc.max(axis=1) - base_acc.min(axis=1)
        best_base = base_acc.max(axis=1)
        for m in ens_methods:
            ens_acc = np.array([by_cell[(d, m)]["accuracy"] for d in datasets])
            oracle[m] = stats.oracle_comparison(base_acc, ens_acc)
            try:
                spread_by_method[m] = stats.spread_gain_correlation(
                    spreads, ens_acc - best_base)
            except (ZeroVariance, PoolbenchError):
                pass
        top_ens = min(ens_methods, key=lambda m: mean_ranks[m])
        spread_corr = spread_by_method.get(top_ens)

    report = stats.StatReport(
        method_names=tuple(rank_methods), mean_ranks=mean_ranks,
        friedman_chi2=chi2, friedman_p=p, nemenyi_cd=cd,
        wilcoxon=wilcoxon, win_matrix=win, pareto_set=tuple(pareto_set),
        spread_gain_correlation=spread_corr, oracle=oracle,
        spread_gain_by_method=spread_by_method)

    leaderboard = []
    metric_keys = ("accuracy", "weighted_f1", "roc_auc_ovr", "log_loss", "ece",
                   "brier_rel", "aurc", "cov_at_95")
    for m in methods:
        rows = [by_cell[(d, m)] for d in datasets if (d, m) in by_cell]
        entry = {"method": m, "role": roles.get(m), "n_datasets": len(rows),
                 "in_rank_set": m in rank_methods,
                 "mean_rank": mean_ranks.get(m),
                 "mean_total_seconds": float(np.mean([_total_seconds(r) for r in rows]))}
        for key in metric_keys:
            entry[f"mean_{key}"] = float(np.mean([r[key] for r in rows]))
        wga_vals = [r["wga"] for r in rows if r.get("wga") is not None]
        entry["mean_wga"] = float(np.mean(wga_vals)) if wga_vals else None
        leaderboard.append(entry)
    leaderboard.sort(key=lambda e: (e["mean_rank"] is None,
                                    e["mean_rank"] if e["mean_rank"] is not None
                                    else -e["mean_accuracy"]))

    ordered = sorted(rank_methods, key=lambda m: mean_ranks[m])
    segments = []
    for i in range(len(ordered)):
        j = i
        while (j + 1 < len(ordered)
               and mean_ranks[ordered[j + 1]] - mean_ranks[ordered[i]] <= cd):
            j += 1
        if j > i:
            segments.append(ordered[i : j + 1])
    segments = [s for s in segments
                if not any(set(s) < set(o) for o in segments)]
    cd_diagram = {"schema": 1, "alpha": alpha, "cd": cd,
                  "mean_ranks": {m: mean_ranks[m] for m in ordered},
                  "groups": segments}

    pareto = {"schema": 1,
              "points": {m: {"mean_accuracy": a, "mean_total_seconds": t}
                         for m, (a, t) in points.items()},
              "frontier": list(pareto_set)}

    header = "method," + ",".join(rank_methods)
    lines = [header]
    for i, m in enumerate(rank_methods):
        lines.append(m + "," + ",".join(f"{win[i, j]:.6g}"
                                        for j in range(len(rank_methods))))
    win_csv = "\n".join(lines) + "\n"

    diversity = None
    consensus: dict[str, dict] = {}
    if predictions_dir is not None:
        base_names = sorted({r["method"] for r in records if r["role"] == "base"})
        diversity = diversity_from_predictions(predictions_dir, base_names)
        consensus = consensus_from_predictions(predictions_dir, base_names)

    return AggregateResult(stat_report=report, leaderboard=leaderboard,
                           diversity=diversity, consensus=consensus,
                           cd_diagram=cd_diagram, pareto=pareto, win_csv=win_csv)


def write_report(agg: AggregateResult, out_dir: str | Path) -> list[Path]:
    """Emit the report files; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def _dump(name: str, payload) -> None:
        path = out_dir / name
        path.write_text(json.dumps(payload, indent=2) + "\n")
        written.append(path)

    _dump("leaderboard.json", {"schema": 1, "leaderboard": agg.leaderboard})
    _dump("stat_report.json", agg.stat_report.to_dict())
    _dump("cd_diagram.json", agg.cd_diagram)
    _dump("pareto.json", agg.pareto)
    div_payload = {"schema": 1,
                   "pool": agg.diversity.to_dict() if agg.diversity else None,
                   "per_task_consensus": agg.consensus}
    _dump("diversity.json", div_payload)
    win_path = out_dir / "win_matrix.csv"
    win_path.write_text(agg.win_csv)
    written.append(win_path)
    return written
