"""Search spaces, the Tree-structured Parzen Estimator sampler, and the
cross-validated, early-stopped trial loop.

The TPE split puts the top-quartile trials (by score, maximizing) into the
"good" set and the rest into "bad"; numeric parameters get Gaussian kernel
densities (log domain for loguniform) with Scott's-rule bandwidths floored
at 1% of the domain width, discrete parameters get +1-smoothed category
masses. Candidates are drawn from the good density and ranked by the
good/bad density ratio.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, asdict
from typing import Callable, Sequence

import numpy as np

from .dataspec import Dataset
from .evaluation import ALL_METRICS, Evaluator, SynthesisPipeline
from .generators import GeneratorFailure
from .metrics import MetricReport

# ---------------------------------------------------------------------------
# Search space


@dataclass(frozen=True)
class Categorical:
    values: tuple

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("categorical domain needs at least one value")


@dataclass(frozen=True)
class ChoiceInt:
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("choice domain needs at least one value")


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (0.0 < self.lo < self.hi):
            raise ValueError("loguniform requires 0 < lo < hi")


Domain = Categorical | ChoiceInt | LogUniform


@dataclass(frozen=True)
class Parameter:
    name: str
    domain: Domain


@dataclass(frozen=True)
class SearchSpace:
    parameters: tuple[Parameter, ...]
    ordering: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self) -> None:
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")
        by_name = {p.name: p.domain for p in self.parameters}
        for group in self.ordering:
            for name in group:
                if name not in names:
                    raise ValueError(f"ordering constraint references unknown parameter {name!r}")
            domains = {by_name[name] for name in group}
            if len(domains) > 1:  # sort-based enforcement needs interchangeable values
                raise ValueError(f"ordering group {group} mixes different domains")

    @classmethod
    def from_document(cls, doc: dict) -> "SearchSpace":
        params = []
        for entry in doc.get("params", []):
            name = entry["name"]
            dom = entry["domain"]
            if "loguniform" in dom:
                lo, hi = dom["loguniform"]
                domain: Domain = LogUniform(float(lo), float(hi))
            elif "choice" in dom:
                values = dom["choice"]
                if all(isinstance(v, int) and not isinstance(v, bool) for v in values):
                    domain = ChoiceInt(tuple(values))
                else:
                    domain = Categorical(tuple(values))
            elif "categorical" in dom:
                domain = Categorical(tuple(dom["categorical"]))
            else:
                raise ValueError(f"unknown domain for parameter {name!r}: {dom}")
            params.append(Parameter(name, domain))
        ordering = tuple(tuple(group) for group in doc.get("ordering", []))
        return cls(tuple(params), ordering)


def enforce_ordering(space: SearchSpace, params: dict) -> dict:
    """Sort each constrained subsequence non-increasing (sample freely, then sort)."""
    out = dict(params)
    for group in space.ordering:
        values = sorted((out[name] for name in group), reverse=True)
        for name, value in zip(group, values):
            out[name] = value
    return out


def sample_random(space: SearchSpace, rng: np.random.Generator) -> dict:
    """One uniform draw per parameter (log-uniform for LogUniform domains)."""
    out = {}
    for p in space.parameters:
        d = p.domain
        if isinstance(d, LogUniform):
            out[p.name] = float(np.exp(rng.uniform(math.log(d.lo), math.log(d.hi))))
        else:
            out[p.name] = d.values[int(rng.integers(len(d.values)))]
    return enforce_ordering(space, out)


# ---------------------------------------------------------------------------
# Trials and strategies


@dataclass
class Trial:
    index: int
    params: dict
    round_scores: list[float] = field(default_factory=list)
    score: float = 0.0
    status: str = "complete"  # complete | pruned | failed
    error: str | None = None
    duration: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


STRATEGY_METRICS = {
    "ml": ("ml_efficiency",),
    "survival": ("survival",),
    "four_metrics": ("ml_efficiency", "survival", "spmse", "log_correlation"),
    "full": ALL_METRICS,
}


@dataclass(frozen=True)
class Strategy:
    id: str
    metric_names: tuple[str, ...]

    @classmethod
    def named(cls, name: str, all_metrics: Sequence[str] | None = None) -> "Strategy":
        if name not in STRATEGY_METRICS:
            raise ValueError(f"unknown strategy {name!r}; choose from {sorted(STRATEGY_METRICS)}")
        metrics = STRATEGY_METRICS[name]
        if name == "full" and all_metrics is not None:
            metrics = tuple(all_metrics)
        return cls(id=name, metric_names=metrics)


def strategy_score(report: MetricReport, strategy: Strategy) -> float:
    """Equal-weight mean over the strategy's metric set."""
    return float(np.mean([report.value(name) for name in strategy.metric_names]))


@dataclass(frozen=True)
class TpeConfig:
    n_startup: int = 10
    gamma: float = 0.25
    n_candidates: int = 24
    bandwidth_floor: float = 0.01  # fraction of the (log-)domain width
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_startup < 1:
            raise ValueError("n_startup must be >= 1")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must be in (0, 1)")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")


def _kde_logpdf(x: float, centers: np.ndarray, bw: float, width: float) -> float:
    """Gaussian KDE mixed with one uniform prior kernel over the domain.

    The prior keeps the density bounded away from zero, so the good/bad
    ratio cannot blow up at the fringes of the explored region."""
    if len(centers) == 0:
        return -math.log(width)
    z = (x - centers) / bw
    kernels = np.exp(-0.5 * z * z) / (bw * math.sqrt(2 * math.pi))
    density = (float(np.sum(kernels)) + 1.0 / width) / (len(centers) + 1)
    return math.log(max(density, 1e-300))


def _bandwidth(centers: np.ndarray, width: float, floor_frac: float) -> float:
    """Scott's-rule bandwidth with two floors: a fixed fraction of the domain
    width and a count-dependent clip width/(n+1). The second keeps kernels
    from collapsing once the good set fills with near-duplicates, which
    otherwise freezes the sampler on the first decent point."""
    floor = max(floor_frac * width, width / (len(centers) + 1))
    if len(centers) < 2:
        return floor
    return max(floor, float(np.std(centers)) * len(centers) ** (-0.2))


def _discrete_mass(values: list, domain_values: tuple) -> np.ndarray:
    counts = np.ones(len(domain_values))  # +1 pseudo-count
    index = {v: i for i, v in enumerate(domain_values)}
    for v in values:
        if v in index:
            counts[index[v]] += 1
    return counts / counts.sum()


def tpe_suggest(
    space: SearchSpace,
    history: Sequence[Trial],
    cfg: TpeConfig,
    rng: np.random.Generator,
) -> dict:
    """Suggest parameters: random during startup, then maximize l(x)/g(x)."""
    if len(history) < cfg.n_startup:
        return sample_random(space, rng)
    ranked = sorted(history, key=lambda t: (-t.score, t.index))
    n_good = max(1, math.ceil(cfg.gamma * len(ranked)))
    good, bad = ranked[:n_good], ranked[n_good:]

    per_param: dict[str, dict] = {}
    for p in space.parameters:
        d = p.domain
        g_vals = [t.params[p.name] for t in good]
        b_vals = [t.params[p.name] for t in bad]
        if isinstance(d, LogUniform):
            lo, hi = math.log(d.lo), math.log(d.hi)
            width = hi - lo
            g_centers = np.log(np.array(g_vals, dtype=np.float64))
            b_centers = np.log(np.array(b_vals, dtype=np.float64))
            per_param[p.name] = {
                "kind": "num",
                "lo": lo,
                "hi": hi,
                "width": width,
                "g": g_centers,
                "g_bw": _bandwidth(g_centers, width, cfg.bandwidth_floor),
                "b": b_centers,
                "b_bw": _bandwidth(b_centers, width, cfg.bandwidth_floor),
            }
        else:
            per_param[p.name] = {
                "kind": "cat",
                "values": d.values,
                "g": _discrete_mass(g_vals, d.values),
                "b": _discrete_mass(b_vals, d.values),
            }

    best_cand = None
    best_ratio = -math.inf
    for _ in range(cfg.n_candidates):
        cand = {}
        for p in space.parameters:
            info = per_param[p.name]
            if info["kind"] == "num":
                # kernel index n_good plays the uniform prior
                pick = int(rng.integers(len(info["g"]) + 1))
                if pick == len(info["g"]):
                    x = float(rng.uniform(info["lo"], info["hi"]))
                else:
                    center = info["g"][pick]
                    x = float(np.clip(rng.normal(center, info["g_bw"]), info["lo"], info["hi"]))
                cand[p.name] = float(np.exp(x))
            else:
                i = int(rng.choice(len(info["values"]), p=info["g"]))
                cand[p.name] = info["values"][i]
        cand = enforce_ordering(space, cand)
        ratio = 0.0
        for p in space.parameters:
            info = per_param[p.name]
            if info["kind"] == "num":
                x = math.log(cand[p.name])
                ratio += _kde_logpdf(x, info["g"], info["g_bw"], info["width"])
                ratio -= _kde_logpdf(x, info["b"], info["b_bw"], info["width"])
            else:
                i = info["values"].index(cand[p.name])
                ratio += math.log(info["g"][i]) - math.log(info["b"][i])
        if ratio > best_ratio:
            best_ratio = ratio
            best_cand = cand
    assert best_cand is not None
    return best_cand


# ---------------------------------------------------------------------------
# Trial evaluation with cross-validation and pruning


@dataclass
class TrialContext:
    """Everything one trial needs: the pipeline, folds of the (original
    space) training data, the strategy, metric machinery, and fixed seeds."""

    pipeline: SynthesisPipeline
    folds: list[tuple[Dataset, Dataset]]
    strategy: Strategy
    evaluator_factory: Callable[[Dataset, Dataset], Evaluator]
    train_seed: int = 0
    sample_seed: int = 0

    def __post_init__(self) -> None:
        self._evaluators: dict[int, Evaluator] = {}

    def _evaluator(self, fold_train: Dataset, fold_holdout: Dataset) -> Evaluator:
        # evaluators cache the real-side encoding and centroids, so reuse one
        # per fold across all trials
        key = id(fold_train)
        if key not in self._evaluators:
            self._evaluators[key] = self.evaluator_factory(fold_train, fold_holdout)
        return self._evaluators[key]

    def round_score(self, fold_train: Dataset, fold_holdout: Dataset, params: dict) -> float:
        syn = self.pipeline.fit_sample(
            fold_train, params, fold_train.n_rows, self.train_seed, self.sample_seed
        )
        evaluator = self._evaluator(fold_train, fold_holdout)
        report = evaluator.evaluate(syn, metric_names=self.strategy.metric_names)
        return strategy_score(report, self.strategy)


def evaluate_trial(
    ctx: TrialContext,
    params: dict,
    best_so_far: float | None,
    prune_ratio: float = 0.10,
    index: int = 0,
) -> Trial:
    """Run up to k cross-validation rounds; prune when the running mean drops
    at least prune_ratio below the best completed trial; any generator
    failure turns the whole trial into status=failed with score 0."""
    trial = Trial(index=index, params=dict(params))
    start = time.perf_counter()
    for fold_train, fold_holdout in ctx.folds:
        try:
            score = ctx.round_score(fold_train, fold_holdout, params)
        except GeneratorFailure as exc:
            trial.status = "failed"
            trial.score = 0.0
            trial.error = str(exc)
            trial.duration = time.perf_counter() - start
            return trial
        trial.round_scores.append(score)
        trial.score = float(np.mean(trial.round_scores))
        done_all = len(trial.round_scores) == len(ctx.folds)
        if (
            not done_all
            and best_so_far is not None
            and trial.score < (1.0 - prune_ratio) * best_so_far
        ):
            trial.status = "pruned"
            trial.duration = time.perf_counter() - start
            return trial
    trial.status = "complete"
    trial.duration = time.perf_counter() - start
    return trial


@dataclass
class OptimizeResult:
    best_params: dict
    best_score: float
    best_index: int
    trials: list[Trial]


def optimize(
    ctx: TrialContext,
    space: SearchSpace,
    n_trials: int = 30,
    cfg: TpeConfig | None = None,
    prune_ratio: float = 0.10,
    log_path: str | None = None,
) -> OptimizeResult:
    """Sequential TPE loop: suggest, evaluate, record. Completed trials feed
    the sampler; the best completed trial wins (ties to the lowest index)."""
    cfg = cfg or TpeConfig()
    rng = np.random.default_rng(cfg.seed)
    trials: list[Trial] = []
    completed: list[Trial] = []
    best: Trial | None = None
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for i in range(n_trials):
            params = tpe_suggest(space, completed, cfg, rng)
            trial = evaluate_trial(
                ctx,
                params,
                best.score if best is not None else None,
                prune_ratio,
                index=i,
            )
            trials.append(trial)
            if trial.status == "complete":
                completed.append(trial)
                if best is None or trial.score > best.score:
                    best = trial
            if log_fh:
                log_fh.write(json.dumps(trial.as_dict()) + "\n")
    finally:
        if log_fh:
            log_fh.close()
    if best is None:
        raise GeneratorFailure("no trial completed; all failed or were pruned")
    return OptimizeResult(
        best_params=best.params, best_score=best.score, best_index=best.index, trials=trials
    )
