"""Experiment orchestration: the seed-matrix evaluation of hyperparameter
sets, aggregation (variability, inter-metric correlations), and strategy
ranking. Cells run sequentially in (set, train_seed, sample_seed) order so
reruns with the same plan are byte-identical.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .constraints import ConstraintReport, MatchRatioReport
from .dataspec import Dataset, SurvivalColumns
from .evaluation import Evaluator, MetricConfig, SynthesisPipeline, constraint_reports
from .generators import GeneratorFailure, GeneratorHandle
from .metrics import MetricReport
from .predictive import endpoint_for, tune_classifier


@dataclass
class ExperimentPlan:
    generator: str = "builtin:copula"
    hyperparameter_sets: dict[str, dict] = field(default_factory=lambda: {"default": {}})
    train_seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    sample_seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    drop_invalid: bool = False
    use_transform: bool = True
    endpoint: str | None = None  # defaults to the event-free survival status
    nonnegative: tuple[str, ...] = ()
    relaxed_tolerance: float = 0.95
    metric_config: MetricConfig = field(default_factory=MetricConfig)
    tune_budget: int = 30
    seed: int = 0
    timeout: float = 3600.0

    def __post_init__(self) -> None:
        if not self.train_seeds or not self.sample_seeds:
            raise ValueError("seed lists must be nonempty")
        if not self.hyperparameter_sets:
            raise ValueError("at least one hyperparameter set is required")

    @classmethod
    def from_document(cls, doc: dict) -> "ExperimentPlan":
        return cls(
            generator=doc.get("generator", "builtin:copula"),
            hyperparameter_sets=doc.get("hyperparameter_sets", {"default": {}}),
            train_seeds=tuple(doc.get("train_seeds", (0, 1, 2, 3, 4))),
            sample_seeds=tuple(doc.get("sample_seeds", (0, 1, 2, 3, 4))),
            drop_invalid=bool(doc.get("drop_invalid", False)),
            use_transform=bool(doc.get("use_transform", True)),
            endpoint=doc.get("endpoint"),
            nonnegative=tuple(doc.get("nonnegative", ())),
            relaxed_tolerance=float(doc.get("relaxed_tolerance", 0.95)),
            metric_config=MetricConfig.from_document(doc.get("metric_config", {})),
            tune_budget=int(doc.get("tune_budget", 30)),
            seed=int(doc.get("seed", 0)),
            timeout=float(doc.get("timeout", 3600.0)),
        )


@dataclass
class Cell:
    set_name: str
    train_seed: int
    sample_seed: int
    metrics: MetricReport | None = None
    constraints: ConstraintReport | None = None
    matches: MatchRatioReport | None = None
    removed_rows: int = 0
    failure: str | None = None

    def as_dict(self) -> dict:
        out: dict = {
            "set": self.set_name,
            "train_seed": self.train_seed,
            "sample_seed": self.sample_seed,
        }
        if self.failure is not None:
            out["failure"] = self.failure
            return out
        assert self.metrics is not None and self.constraints is not None
        out["metrics"] = self.metrics.as_dict()["metrics"]
        notes = self.metrics.as_dict().get("notes")
        if notes:
            out["metric_notes"] = notes
        out["constraints"] = self.constraints.as_dict()
        out["match_ratios"] = self.matches.as_dict() if self.matches else None
        out["removed_rows"] = self.removed_rows
        return out


@dataclass
class EvaluationMatrix:
    cells: list[Cell]
    metric_names: tuple[str, ...]
    phase_seconds: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "metric_names": list(self.metric_names),
            "cells": [c.as_dict() for c in self.cells],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvaluationMatrix":
        cells = []
        for entry in doc["cells"]:
            cell = Cell(
                set_name=entry["set"],
                train_seed=entry["train_seed"],
                sample_seed=entry["sample_seed"],
                failure=entry.get("failure"),
            )
            if cell.failure is None:
                from .metrics import MetricValue

                cell.metrics = MetricReport(
                    values=tuple(
                        MetricValue(k, v) for k, v in entry["metrics"].items()
                    )
                )
            cells.append(cell)
        return cls(cells=cells, metric_names=tuple(doc["metric_names"]))


def run_experiment(
    plan: ExperimentPlan,
    real_train: Dataset,
    real_test: Dataset,
    sc: SurvivalColumns,
) -> EvaluationMatrix:
    """Fit/sample/evaluate every (hyperparameter set, train seed, sample seed)
    cell against the held-out real test split; failures mark the cell and the
    run continues."""
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    endpoint_label = plan.endpoint or sc.efsstat
    endpoint = endpoint_for(real_train.schema, endpoint_label, sc)
    classifier_spec = tune_classifier(
        real_train, endpoint, budget=plan.tune_budget, seed=plan.seed
    )
    timings["classifier_tuning"] = time.perf_counter() - t0

    handle = GeneratorHandle.parse(plan.generator, timeout=plan.timeout)
    pipeline = SynthesisPipeline(handle, sc, plan.use_transform)
    evaluator = Evaluator(
        real_fidelity=real_test,
        real_ml_test=real_test,
        sc=sc,
        endpoint=endpoint,
        classifier_spec=classifier_spec,
        config=plan.metric_config,
        seed=plan.seed,
    )

    t1 = time.perf_counter()
    cells: list[Cell] = []
    for set_name in plan.hyperparameter_sets:
        params = plan.hyperparameter_sets[set_name]
        for train_seed in plan.train_seeds:
            for sample_seed in plan.sample_seeds:
                cell = Cell(set_name, train_seed, sample_seed)
                try:
                    syn = pipeline.fit_sample(
                        real_train, params, real_train.n_rows, train_seed, sample_seed
                    )
                    report, matches = constraint_reports(
                        syn, sc, plan.nonnegative, plan.relaxed_tolerance
                    )
                    cell.constraints = report
                    cell.matches = matches
                    if plan.drop_invalid:
                        kept = syn.mask(report.valid_mask)
                        cell.removed_rows = syn.n_rows - kept.n_rows
                        syn = kept
                    cell.metrics = evaluator.evaluate(
                        syn, synthetic_id=f"{set_name}/t{train_seed}/s{sample_seed}"
                    )
                except GeneratorFailure as exc:
                    cell.failure = str(exc)
                cells.append(cell)
    timings["evaluation"] = time.perf_counter() - t1
    return EvaluationMatrix(
        cells=cells, metric_names=evaluator.metric_names(), phase_seconds=timings
    )


def aggregate(matrix: EvaluationMatrix) -> dict:
    """Per-metric summary stats, per-set all-metric averages, and inter-metric
    Pearson/Spearman correlations over the evaluated cells."""
    good = [c for c in matrix.cells if c.failure is None and c.metrics is not None]
    if len(good) < 2:
        raise ValueError("need at least 2 evaluated cells to aggregate")
    names = matrix.metric_names
    table = np.array([[c.metrics.value(n) for n in names] for c in good])

    per_metric = {}
    for j, name in enumerate(names):
        col = table[:, j]
        per_metric[name] = {
            "mean": float(np.mean(col)),
            "std": float(np.std(col, ddof=1)),
            "min": float(np.min(col)),
            "max": float(np.max(col)),
        }

    set_names = sorted({c.set_name for c in good})
    per_set = {}
    for set_name in set_names:
        rows = [i for i, c in enumerate(good) if c.set_name == set_name]
        per_set[set_name] = {
            "cells": len(rows),
            "all_metric_average": float(np.mean(table[rows])),
        }

    out: dict = {
        "cells_evaluated": len(good),
        "cells_failed": len(matrix.cells) - len(good),
        "failed_cells": [
            {"set": c.set_name, "train_seed": c.train_seed, "sample_seed": c.sample_seed}
            for c in matrix.cells
            if c.failure is not None
        ],
        "per_metric": per_metric,
        "per_set": per_set,
    }
    constant = [j for j in range(len(names)) if np.std(table[:, j]) == 0.0]
    pearson = np.eye(len(names))
    spearman = np.eye(len(names))
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            if i in constant or j in constant:
                p = s = 0.0
            else:
                p = float(np.corrcoef(table[:, i], table[:, j])[0, 1])
                s = float(
                    np.corrcoef(rankdata(table[:, i]), rankdata(table[:, j]))[0, 1]
                )
            pearson[i, j] = pearson[j, i] = p
            spearman[i, j] = spearman[j, i] = s
    out["correlations"] = {
        "metrics": list(names),
        "pearson": pearson.tolist(),
        "spearman": spearman.tolist(),
    }
    return out


def rank_strategies(
    averages: dict[str, float], default_name: str = "default"
) -> dict:
    """Dense ranks (1 best) of per-strategy all-metric averages, ties broken
    by declaration order, plus relative improvement over the default set."""
    if len(averages) < 2:
        raise ValueError("need at least 2 strategies to rank")
    names = list(averages)
    order = sorted(range(len(names)), key=lambda i: (-averages[names[i]], i))
    ranks = {}
    for rank, i in enumerate(order, start=1):
        ranks[names[i]] = rank
    out: dict = {"ranks": ranks, "averages": dict(averages)}
    if default_name in averages:
        base = averages[default_name]
        if base > 0:
            out["improvement_over_default"] = {
                name: averages[name] / base - 1.0 for name in names
            }
    return out
