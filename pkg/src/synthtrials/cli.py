"""Command-line interface.

Subcommands: validate, evaluate, optimize, generate, experiment, report.
Exit codes: 0 success, 1 validation failure (nonzero V7 under --strict),
2 usage or input errors.
"""

from __future__ import annotations

import argparse
import csv as csv_mod
import json
import os
import sys


from . import jsonio
from .constraints import match_ratios, validate
from .dataspec import (
    DataError,
    SchemaError,
    SurvivalColumns,
    load_csv,
    parse_schema_document,
    write_csv,
)
from .evaluation import Evaluator, MetricConfig, SynthesisPipeline
from .generators import GeneratorFailure, GeneratorHandle
from .harness import EvaluationMatrix, ExperimentPlan, aggregate, rank_strategies, run_experiment
from .hpo import SearchSpace, Strategy, TpeConfig, TrialContext, optimize
from .dataspec import kfold
from .predictive import endpoint_for, tune_classifier


class CliError(Exception):
    pass


def _read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read JSON file {path}: {exc}") from exc


def _load_schema(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_schema_document(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read schema {path}: {exc}") from exc


def _require_survival(sc: SurvivalColumns | None) -> SurvivalColumns:
    if sc is None:
        raise CliError("schema document must include a 'survival' block for this command")
    return sc


def _load_data(path: str, schema, missing_token: str):
    try:
        return load_csv(path, schema, missing_token)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc


def _emit(doc: dict, out: str | None, fmt: str, csv_rows=None) -> None:
    if fmt == "csv":
        if csv_rows is None:
            raise CliError("csv output is not supported for this command")
        target = open(out, "w", encoding="utf-8", newline="") if out else sys.stdout
        writer = csv_mod.writer(target)
        for row in csv_rows:
            writer.writerow(row)
        if out:
            target.close()
        return
    text = jsonio.dumps(doc)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_validate(args) -> int:
    schema, sc = _load_schema(args.schema)
    nonneg: tuple[str, ...] = ()
    tolerance = 0.95
    if args.constraints:
        cfg = _read_json(args.constraints)
        nonneg = tuple(cfg.get("nonnegative", ()))
        tolerance = float(cfg.get("relaxed_tolerance", 0.95))
        if "survival" in cfg:
            s = cfg["survival"]
            sc = SurvivalColumns(
                ostm=s["ostm"],
                efstm=s["efstm"],
                osstat=s["osstat"],
                efsstat=s["efsstat"],
                efstm_dif=s.get("efstm_dif", ""),
            )
    sc = _require_survival(sc)
    ds = _load_data(args.data, schema, args.missing_token)
    report = validate(ds, sc, nonneg)
    matches = match_ratios(ds, sc, tolerance)
    doc = {"constraints": report.as_dict(), "match_ratios": matches.as_dict()}
    rows = [["rule", "violations", "rate"]]
    for rule in ("V1", "V2", "V3", "V4", "V5", "V6", "V7"):
        rows.append([rule, report.violations[rule], f"{report.rates[rule]:.6g}"])
    rows.append(["exact_match", "", f"{matches.exact:.6g}"])
    rows.append(["relaxed_match", "", f"{matches.relaxed:.6g}"])
    _emit(doc, args.out, args.format, rows)
    if args.strict and report.violations["V7"] > 0:
        return 1
    return 0


def _metric_config(args) -> MetricConfig:
    if getattr(args, "metric_config", None):
        return MetricConfig.from_document(_read_json(args.metric_config))
    return MetricConfig()


def _cmd_evaluate(args) -> int:
    schema, sc = _load_schema(args.schema)
    sc = _require_survival(sc)
    real_train = _load_data(args.real_train, schema, args.missing_token)
    real_test = _load_data(args.real_test, schema, args.missing_token)
    if args.real_as_synthetic:
        syn = real_train
        syn_id = "real-train-as-synthetic"
    elif args.synthetic:
        syn = _load_data(args.synthetic, schema, args.missing_token)
        syn_id = args.synthetic
    else:
        raise CliError("provide --synthetic or --real-as-synthetic")

    endpoint = endpoint_for(schema, args.endpoint or sc.efsstat, sc)
    spec = tune_classifier(real_train, endpoint, budget=args.tune_budget, seed=args.seed)
    constraint_report = validate(syn, sc, ())
    matches = match_ratios(syn, sc)
    removed = 0
    if args.drop_invalid:
        kept = syn.mask(constraint_report.valid_mask)
        removed = syn.n_rows - kept.n_rows
        syn = kept
    evaluator = Evaluator(
        real_fidelity=real_test,
        real_ml_test=real_test,
        sc=sc,
        endpoint=endpoint,
        classifier_spec=spec,
        config=_metric_config(args),
        seed=args.seed,
    )
    report = evaluator.evaluate(syn, synthetic_id=syn_id)
    doc = report.as_dict()
    doc["constraints"] = constraint_report.as_dict()
    doc["match_ratios"] = matches.as_dict()
    if args.drop_invalid:
        doc["removed_rows"] = removed
    rows = [["metric", "value"]] + [
        [v.name, f"{v.value:.6g}"] for v in report.values
    ]
    _emit(doc, args.out, args.format, rows)
    return 0


def _cmd_generate(args) -> int:
    schema, sc = _load_schema(args.schema)
    train = _load_data(args.data, schema, args.missing_token)
    handle = GeneratorHandle.parse(args.generator, timeout=args.timeout)
    if args.no_clamp:
        handle.clamp = False
    params = _read_json(args.params) if args.params else {}
    pipeline = SynthesisPipeline(
        handle, sc, use_transform=not args.no_transform and sc is not None
    )
    n = args.n or train.n_rows
    syn = pipeline.fit_sample(train, params, n, args.train_seed, args.sample_seed)
    write_csv(syn, args.out, args.missing_token)
    print(jsonio.dumps({"rows": syn.n_rows, "out": args.out}))
    return 0


def _cmd_optimize(args) -> int:
    schema, sc = _load_schema(args.schema)
    sc = _require_survival(sc)
    train = _load_data(args.data, schema, args.missing_token)
    space = SearchSpace.from_document(_read_json(args.space))
    handle = GeneratorHandle.parse(args.generator, timeout=args.timeout)
    metric_config = _metric_config(args)

    endpoint = endpoint_for(schema, args.endpoint or sc.efsstat, sc)
    classifier_spec = tune_classifier(
        train, endpoint, budget=args.tune_budget, seed=args.seed
    )
    strategy = Strategy.named(args.strategy)
    folds = kfold(train, args.folds, args.seed)

    def evaluator_factory(fold_train, fold_holdout):
        return Evaluator(
            real_fidelity=fold_train,
            real_ml_test=fold_holdout,
            sc=sc,
            endpoint=endpoint,
            classifier_spec=classifier_spec,
            config=metric_config,
            seed=args.seed,
        )

    ctx = TrialContext(
        pipeline=SynthesisPipeline(handle, sc, use_transform=not args.no_transform),
        folds=folds,
        strategy=strategy,
        evaluator_factory=evaluator_factory,
        train_seed=args.seed,
        sample_seed=args.seed,
    )
    result = optimize(
        ctx,
        space,
        n_trials=args.trials,
        cfg=TpeConfig(seed=args.seed),
        prune_ratio=args.prune_ratio,
        log_path=args.trial_log,
    )
    statuses = [t.status for t in result.trials]
    doc = {
        "best_params": result.best_params,
        "best_score": result.best_score,
        "best_trial": result.best_index,
        "trials": len(result.trials),
        "completed": statuses.count("complete"),
        "pruned": statuses.count("pruned"),
        "failed": statuses.count("failed"),
        "strategy": strategy.id,
    }
    _emit(doc, args.out, "json")
    return 0


def _cmd_experiment(args) -> int:
    schema, sc = _load_schema(args.schema)
    sc = _require_survival(sc)
    real_train = _load_data(args.real_train, schema, args.missing_token)
    real_test = _load_data(args.real_test, schema, args.missing_token)
    plan = ExperimentPlan.from_document(_read_json(args.plan))
    matrix = run_experiment(plan, real_train, real_test, sc)
    os.makedirs(args.out_dir, exist_ok=True)
    matrix_path = os.path.join(args.out_dir, "matrix.json")
    aggregate_path = os.path.join(args.out_dir, "aggregate.json")
    timings_path = os.path.join(args.out_dir, "timings.json")
    jsonio.dump_file(matrix.as_dict(), matrix_path)
    agg = aggregate(matrix)
    jsonio.dump_file(agg, aggregate_path)
    # timings vary run to run, so they live outside the deterministic reports
    with open(timings_path, "w", encoding="utf-8") as fh:
        json.dump({"phase_seconds": matrix.phase_seconds}, fh, indent=2)
    print(
        jsonio.dumps(
            {
                "cells": len(matrix.cells),
                "failed": sum(1 for c in matrix.cells if c.failure),
                "matrix": matrix_path,
                "aggregate": aggregate_path,
                "timings": timings_path,
            }
        )
    )
    return 0


def _cmd_report(args) -> int:
    matrix = EvaluationMatrix.from_dict(_read_json(args.matrix))
    agg = aggregate(matrix)
    doc: dict = {"aggregate": agg}
    if args.rank:
        averages = {
            name: info["all_metric_average"] for name, info in agg["per_set"].items()
        }
        doc["ranking"] = rank_strategies(averages, args.default_name)
    rows = [["metric", "mean", "std", "min", "max"]]
    for name, stats in agg["per_metric"].items():
        rows.append(
            [name] + [f"{stats[k]:.6g}" for k in ("mean", "std", "min", "max")]
        )
    _emit(doc, args.out, args.format, rows)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--missing-token", default="", help="CSV token that marks a missing cell")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--timeout", type=float, default=3600.0, help="external generator timeout (s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthtrials",
        description="Score, validate, and optimize synthetic clinical-trial data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check survival-rule violations (V1-V7)")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--constraints", default=None, help="constraint configuration JSON")
    p.add_argument("--strict", action="store_true", help="exit 1 when any row violates V7")
    _add_common(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("evaluate", help="compute the metric report for a synthetic dataset")
    p.add_argument("--real-train", required=True)
    p.add_argument("--real-test", required=True)
    p.add_argument("--synthetic", default=None)
    p.add_argument(
        "--real-as-synthetic",
        action="store_true",
        help="score the real training data as if it were synthetic",
    )
    p.add_argument("--schema", required=True)
    p.add_argument("--metric-config", default=None)
    p.add_argument("--drop-invalid", action="store_true")
    p.add_argument("--endpoint", default=None, help="binary label column for ML efficiency")
    p.add_argument("--tune-budget", type=int, default=30)
    _add_common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("generate", help="fit a generator and sample synthetic rows")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--generator", default="builtin:copula")
    p.add_argument("--params", default=None, help="hyperparameter JSON file")
    p.add_argument("--n", type=int, default=None, help="rows to sample (default: training size)")
    p.add_argument("--train-seed", type=int, default=0)
    p.add_argument("--sample-seed", type=int, default=0)
    p.add_argument("--no-transform", action="store_true")
    p.add_argument("--no-clamp", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("optimize", help="TPE hyperparameter optimization of a generator")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--generator", default="builtin:copula")
    p.add_argument("--space", required=True)
    p.add_argument(
        "--strategy", default="full", choices=("ml", "survival", "four_metrics", "full")
    )
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--prune-ratio", type=float, default=0.10)
    p.add_argument("--metric-config", default=None)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--tune-budget", type=int, default=30)
    p.add_argument("--no-transform", action="store_true")
    p.add_argument("--trial-log", default=None, help="JSON-lines trial log path")
    _add_common(p)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("experiment", help="run the seed-matrix evaluation of a plan")
    p.add_argument("--real-train", required=True)
    p.add_argument("--real-test", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out-dir", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("report", help="aggregate a stored evaluation matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--rank", action="store_true")
    p.add_argument("--default-name", default="default")
    _add_common(p)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (CliError, SchemaError, DataError, GeneratorFailure, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
