"""Glue between datasets, metrics, and generators: metric configuration,
the all-metric evaluator with per-reference caches, and the synthesis
pipeline (survival-difference preprocessing plus generation plus inversion).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintReport, MatchRatioReport, match_ratios, validate
from .dataspec import Dataset, SurvivalColumns, apply_efstm_transform, invert_efstm_transform
from .encoding import EncodingPlan
from .generators import GeneratorHandle
from .metrics import (
    KMeansConfig,
    MetricReport,
    MetricValue,
    SpmseConfig,
    assign_clusters,
    basic_statistical_measure,
    fit_kmeans,
    kmeans_score_from_centroids,
    log_correlation_score,
    regularized_support_coverage,
    spmse_index_encoded,
)
from .predictive import ClassifierSpec, EndpointSpec, ml_efficiency
from .survival import survival_metric

FIDELITY_METRICS = (
    "basic_statistical_measure",
    "support_coverage",
    "log_correlation",
    "spmse",
    "kmeans",
    "survival",
)
ALL_METRICS = FIDELITY_METRICS + ("ml_efficiency",)


@dataclass(frozen=True)
class MetricConfig:
    spmse: SpmseConfig = field(default_factory=SpmseConfig)
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)
    coverage_bins: int = 10
    min_association: float | None = None

    @classmethod
    def from_document(cls, doc: dict) -> "MetricConfig":
        return cls(
            spmse=SpmseConfig(**doc.get("spmse", {})),
            kmeans=KMeansConfig(**doc.get("kmeans", {})),
            coverage_bins=int(doc.get("coverage_bins", 10)),
            min_association=doc.get("min_association"),
        )


class Evaluator:
    """Computes the configured metrics for synthetic datasets against fixed
    real references, caching the expensive real-side artifacts (encoding
    plan, k-means centroids) across evaluations.

    ``real_fidelity`` is the reference for the six fidelity metrics;
    ``real_ml_test`` is the held-out set scored by ML Efficiency.
    """

    def __init__(
        self,
        real_fidelity: Dataset,
        real_ml_test: Dataset,
        sc: SurvivalColumns | None,
        endpoint: EndpointSpec | None,
        classifier_spec: ClassifierSpec | None,
        config: MetricConfig | None = None,
        seed: int = 0,
    ):
        self.real_fidelity = real_fidelity
        self.real_ml_test = real_ml_test
        self.sc = sc
        self.endpoint = endpoint
        self.classifier_spec = classifier_spec
        self.config = config or MetricConfig()
        self.seed = seed
        self._plan: EncodingPlan | None = None
        self._kmeans_fit = None

    def _encoding(self) -> EncodingPlan:
        if self._plan is None:
            self._plan = EncodingPlan.fit(self.real_fidelity)
        return self._plan

    def _kmeans(self):
        if self._kmeans_fit is None:
            cfg = self.config.kmeans
            if cfg.seed != self.seed:
                cfg = KMeansConfig(cfg.k, cfg.restarts, cfg.max_iterations, self.seed)
            X = self._encoding().transform(self.real_fidelity)
            centers, labels, _ = fit_kmeans(X, cfg)
            self._kmeans_fit = (centers, labels, cfg.k)
        return self._kmeans_fit

    def metric_names(self) -> tuple[str, ...]:
        names = list(FIDELITY_METRICS)
        if self.sc is None:
            names.remove("survival")
        if self.endpoint is not None and self.classifier_spec is not None:
            names.append("ml_efficiency")
        return tuple(names)

    def evaluate(
        self,
        syn: Dataset,
        metric_names: tuple[str, ...] | None = None,
        synthetic_id: str = "synthetic",
    ) -> MetricReport:
        names = metric_names if metric_names is not None else self.metric_names()
        values: list[MetricValue] = []
        for name in names:
            values.append(self._one(name, syn))
        return MetricReport(
            values=tuple(values), synthetic_id=synthetic_id, seed=self.seed
        )

    def _one(self, name: str, syn: Dataset) -> MetricValue:
        real = self.real_fidelity
        if name == "basic_statistical_measure":
            return basic_statistical_measure(real, syn)
        if name == "support_coverage":
            return regularized_support_coverage(real, syn, self.config.coverage_bins)
        if name == "log_correlation":
            return log_correlation_score(real, syn, self.config.min_association)
        if name == "spmse":
            plan = self._encoding()
            result = spmse_index_encoded(
                plan.transform(real), plan.transform(syn), self.config.spmse, self.seed
            )
            note = None if result.converged else "logistic fit did not converge"
            return MetricValue("spmse", result.score, note=note)
        if name == "kmeans":
            centers, real_labels, k = self._kmeans()
            syn_labels = assign_clusters(self._encoding().transform(syn), centers)
            return kmeans_score_from_centroids(real_labels, syn_labels, k)
        if name == "survival":
            if self.sc is None:
                raise ValueError("survival metric requires survival columns")
            scores = survival_metric(real, syn, self.sc)
            note = None
            if scores.excluded_rows:
                note = f"{scores.excluded_rows} rows excluded from KM curve"
            if scores.empty_grid:
                note = (note + "; " if note else "") + "empty comparison grid"
            return MetricValue("survival", scores.survival_metric, note=note)
        if name == "ml_efficiency":
            if self.endpoint is None or self.classifier_spec is None:
                raise ValueError("ml_efficiency requires an endpoint and classifier spec")
            return ml_efficiency(syn, self.real_ml_test, self.endpoint, self.classifier_spec)
        raise KeyError(f"unknown metric {name!r}")


def constraint_reports(
    ds: Dataset,
    sc: SurvivalColumns,
    nonneg_cols: tuple[str, ...] = (),
    tolerance: float = 0.95,
) -> tuple[ConstraintReport, MatchRatioReport]:
    return validate(ds, sc, nonneg_cols), match_ratios(ds, sc, tolerance)


@dataclass
class SynthesisPipeline:
    """Preprocess, generate, postprocess: the dataset-level pipeline.

    With use_transform on, the generator is fit on data where EFSTM is
    replaced by the difference OSTM - EFSTM, and synthetic EFSTM is
    reconstructed before anything downstream sees the rows.
    """

    gen: GeneratorHandle
    sc: SurvivalColumns | None = None
    use_transform: bool = True

    def fit_sample(
        self, train: Dataset, params: dict, n: int, train_seed: int, sample_seed: int
    ) -> Dataset:
        transform = self.use_transform and self.sc is not None
        model_input = apply_efstm_transform(train, self.sc) if transform else train
        syn = self.gen.fit_sample(model_input, params, n, train_seed, sample_seed)
        if transform:
            syn = invert_efstm_transform(syn, self.sc)
        return syn


def nan_guard(syn: Dataset) -> int:
    """Count non-finite numeric cells in columns that do not allow missing."""
    bad = 0
    for col in syn.schema:
        if col.kind == "categorical":
            if not col.missing_allowed:
                bad += sum(1 for v in syn.column(col.name) if v is None)
            continue
        vals = syn.column(col.name).astype(np.float64)
        if col.missing_allowed:
            bad += int(np.sum(np.isinf(vals)))
        else:
            bad += int(np.sum(~np.isfinite(vals)))
    return bad
