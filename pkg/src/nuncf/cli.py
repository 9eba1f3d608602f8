"""Command line entry point: ``nuncf {train,explain,bench,metrics}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .counterfactual import OrderingMode
from .dataset import Schema
from .errors import NuncfError
from .harness import (
    ExperimentConfig,
    average_reports,
    explain_one,
    metrics_from_records,
    prepare,
    result_record,
    run_experiment,
    run_repeats,
    write_report,
    write_summary,
)
from .metrics import format_table


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    if args.desired_class is not None:
        cfg = replace(cfg, desired_class=args.desired_class)
    if args.method is not None:
        mode = args.mode or ("null" if args.method.upper() == "RND" else "qrel")
        cfg = replace(cfg, methods=[[args.method, mode]])
    return cfg


def cmd_train(args) -> int:
    cfg = _config(args)
    prepared = prepare(replace(cfg, model_file=None, prediction_table=None))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    prepared.model.save(out / "model.npz")
    prepared.schema.save(out / "schema.json")
    (out / "train.json").write_text(json.dumps(
        {"accuracy": prepared.accuracy, "n_train": len(prepared.train),
         "n_test": len(prepared.test), "config": cfg.to_dict()}, indent=2, sort_keys=True) + "\n")
    print(f"accuracy {prepared.accuracy:.4f}; model written to {out / 'model.npz'}")
    return 0


def cmd_explain(args) -> int:
    cfg = _config(args)
    prepared = prepare(cfg)
    method, mode = cfg.methods[0]
    res, text = explain_one(cfg, prepared, args.query_index, method, mode)
    print(text)
    if args.trace:
        from .counterfactual import normalize_cell
        from .relevance import Method
        cell = normalize_cell(Method.parse(method), OrderingMode.parse(mode))
        rec = result_record(cell, 0, args.query_index, prepared.test.X[args.query_index], res)
        print(json.dumps(rec, indent=2, sort_keys=True))
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args)
    if cfg.repeats == 1:
        report = run_experiment(cfg)
        out = write_report(report, cfg.out)
        sys.stdout.write(report.table())
    else:
        reports = run_repeats(cfg)
        out = Path(cfg.out)
        for r, report in enumerate(reports):
            write_report(report, out / f"repeat-{r}")
        sys.stdout.write(write_summary(average_reports(reports), out))
    print(f"reports written to {out}")
    return 0


def cmd_metrics(args) -> int:
    out = Path(args.out or ".")
    schema = Schema.load(out / "schema.json")
    cells = metrics_from_records(out / "records.jsonl", schema)
    sys.stdout.write(format_table(cells))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nuncf", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="experiment config (JSON)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--method", help="RND, LIME, SHAP, LIME_C, SHAP_C or Chi2")
        p.add_argument("--mode", choices=["qrel", "nrel", "null"])
        p.add_argument("--desired-class", dest="desired_class", help="class label to reach")
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("train", help="train a forest and save it")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", help="explain one test-split row")
    common(p)
    p.add_argument("--query-index", type=int, required=True, help="row of the test split")
    p.add_argument("--trace", action="store_true", help="also print the substitution trace")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("bench", help="run the full method matrix")
    common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("metrics", help="recompute #F/$F from a bench output directory")
    p.add_argument("--out", required=True, help="bench output directory")
    p.set_defaults(func=cmd_metrics)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (NuncfError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
