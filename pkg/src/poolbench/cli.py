"""Command-line interface.

Verbs:
    run       --config cfg.json [--workers N]   write records.jsonl + artifacts
    report    --records records.jsonl --out DIR build the full report bundle
    diversity --records records.jsonl           diversity.json only
    validate  --config cfg.json                 config lint
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import PoolbenchError
from .harness import RunConfig, aggregate, load_records, run, write_report


def _cmd_run(args) -> int:
    config = RunConfig.from_json(args.config)
    records = run(config, workers=args.workers)
    failures = sum(1 for r in records if r.error)
    print(f"wrote {len(records)} records to {config.out_dir / 'records.jsonl'}"
          f" ({failures} error records)")
    return 0


def _cmd_report(args) -> int:
    records_path = Path(args.records)
    records = load_records(records_path)
    predictions_dir = records_path.parent / "predictions"
    agg = aggregate(records, alpha=args.alpha,
                    predictions_dir=predictions_dir if predictions_dir.is_dir() else None)
    for path in write_report(agg, args.out):
        print(f"wrote {path}")
    return 0


def _cmd_diversity(args) -> int:
    from .harness import consensus_from_predictions, diversity_from_predictions

    records_path = Path(args.records)
    records = load_records(records_path)
    base_names = sorted({r["method"] for r in records
                         if r["role"] == "base" and not r.get("error")})
    predictions_dir = records_path.parent / "predictions"
    report = diversity_from_predictions(predictions_dir, base_names)
    if report is None:
        print("no base predictions found next to the records file", file=sys.stderr)
        return 1
    payload = {"schema": 1, "pool": report.to_dict(),
               "per_task_consensus": consensus_from_predictions(predictions_dir,
                                                                base_names)}
    out = Path(args.out) if args.out else records_path.parent / "diversity.json"
    out.write_text(json.dumps(payload, indent=2) + "\n")
    print(f"wrote {out}")
    return 0


def _cmd_validate(args) -> int:
    config = RunConfig.from_json(args.config)
    problems = config.validate()
    if problems:
        for p in problems:
            print(f"problem: {p}")
        return 1
    print("config ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poolbench",
                                     description="Ensemble benchmark lab")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run the benchmark")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.set_defaults(fn=_cmd_run)

    p_report = sub.add_parser("report", help="aggregate records into a report")
    p_report.add_argument("--records", required=True)
    p_report.add_argument("--out", required=True)
    p_report.add_argument("--alpha", type=float, default=0.05)
    p_report.set_defaults(fn=_cmd_report)

    p_div = sub.add_parser("diversity", help="base-pool diversity only")
    p_div.add_argument("--records", required=True)
    p_div.add_argument("--out", default=None)
    p_div.set_defaults(fn=_cmd_diversity)

    p_val = sub.add_parser("validate", help="lint a run config")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(fn=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except PoolbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
