"""ML Efficiency: a gradient-boosted-trees classifier tuned on real data,
trained on synthetic data, scored by MCC on the held-out real test set.

The boosted learner is self-contained (logistic loss, second-order leaf
steps, subsampling) and deterministic given its seed; the hot tree kernels
live in _kernels with numba/numpy twins.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dataspec import ColumnSchema, Dataset, SurvivalColumns, kfold
from .encoding import EncodingPlan
from .metrics import MetricValue

TREE_RIDGE = 1e-3  # leaf-step regularizer shared by both kernel backends


@dataclass(frozen=True)
class ClassifierSpec:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    subsample_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ValueError("learning_rate must be in (0, 1]")
        if not (0.0 < self.subsample_fraction <= 1.0):
            raise ValueError("subsample_fraction must be in (0, 1]")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")

    def as_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "learning_rate": self.learning_rate,
            "min_samples_leaf": self.min_samples_leaf,
            "subsample_fraction": self.subsample_fraction,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class EndpointSpec:
    label_column: str
    feature_columns: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.label_column in self.feature_columns:
            raise ValueError("label must not appear among features")


def endpoint_for(
    schema: list[ColumnSchema] | tuple[ColumnSchema, ...],
    label: str,
    sc: SurvivalColumns | None = None,
) -> EndpointSpec:
    """Endpoint over the covariate columns: survival times and sibling
    outcome/status columns are excluded, since either leaks the label (a
    co-endpoint can near-determine the target outright)."""
    by_name = {c.name: c for c in schema}
    if label not in by_name:
        raise KeyError(f"label column {label!r} not in schema")
    if by_name[label].kind != "binary":
        raise ValueError(f"label column {label!r} must be binary")
    excluded = {label}
    if sc is not None:
        excluded |= {sc.ostm, sc.efstm, sc.efstm_dif, sc.osstat, sc.efsstat}
    excluded |= {
        c.name
        for c in schema
        if c.roles & {"survival_time", "survival_status", "outcome"}
    }
    features = tuple(c.name for c in schema if c.name not in excluded)
    return EndpointSpec(label_column=label, feature_columns=features)


class GradientBoostedTrees:
    """Binary classifier: boosted regression trees on the logistic loss."""

    def __init__(self, spec: ClassifierSpec):
        self.spec = spec
        self.trees: list[tuple] = []
        self.f0 = 0.0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GradientBoostedTrees":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        classes = np.unique(y)
        if len(classes) < 2:
            raise ValueError("labels contain a single class")
        rng = np.random.default_rng(self.spec.seed)
        p0 = float(np.clip(np.mean(y), 1e-6, 1.0 - 1e-6))
        self.f0 = math.log(p0 / (1.0 - p0))
        f = np.full(len(y), self.f0)
        n = len(y)
        for _ in range(self.spec.n_trees):
            p = 1.0 / (1.0 + np.exp(-f))
            grad = p - y
            hess = p * (1.0 - p)
            if self.spec.subsample_fraction < 1.0:
                size = max(1, int(round(self.spec.subsample_fraction * n)))
                rows = np.sort(rng.choice(n, size=size, replace=False))
            else:
                rows = np.arange(n)
            tree = _kernels.build_tree(
                X[rows],
                np.ascontiguousarray(grad[rows]),
                np.ascontiguousarray(hess[rows]),
                self.spec.max_depth,
                self.spec.min_samples_leaf,
                TREE_RIDGE,
            )
            self.trees.append(tree)
            f = f + self.spec.learning_rate * _kernels.tree_apply(*tree, X)
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        f = np.full(X.shape[0], self.f0)
        for tree in self.trees:
            f = f + self.spec.learning_rate * _kernels.tree_apply(*tree, X)
        return f

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.decision_function(X)))

    def predict(self, X: np.ndarray, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(np.int64)


@dataclass
class TrainedClassifier:
    model: GradientBoostedTrees
    plan: EncodingPlan
    endpoint: EndpointSpec
    spec: ClassifierSpec
    rows_used: int
    rows_dropped: int

    def predict(self, ds: Dataset) -> np.ndarray:
        return self.model.predict(self.plan.transform(ds))

    def predict_proba(self, ds: Dataset) -> np.ndarray:
        return self.model.predict_proba(self.plan.transform(ds))


def _labelled_rows(ds: Dataset, endpoint: EndpointSpec) -> tuple[Dataset, np.ndarray, int]:
    labels = ds.column(endpoint.label_column).astype(np.float64)
    keep = ~np.isnan(labels)
    dropped = int(np.sum(~keep))
    kept = ds.mask(keep) if dropped else ds
    return kept, labels[keep], dropped


def fit_classifier(
    train: Dataset, endpoint: EndpointSpec, spec: ClassifierSpec
) -> TrainedClassifier:
    """Fit the boosted-trees classifier; rows with a missing label are dropped."""
    kept, y, dropped = _labelled_rows(train, endpoint)
    if kept.n_rows == 0:
        raise ValueError("no labelled rows")
    plan = EncodingPlan.fit(kept, columns=list(endpoint.feature_columns))
    model = GradientBoostedTrees(spec).fit(plan.transform(kept), y)
    return TrainedClassifier(
        model=model,
        plan=plan,
        endpoint=endpoint,
        spec=spec,
        rows_used=kept.n_rows,
        rows_dropped=dropped,
    )


def mcc(truth: np.ndarray, pred: np.ndarray) -> float:
    """Matthews correlation coefficient; any zero denominator factor gives 0."""
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if len(truth) != len(pred):
        raise ValueError("length mismatch")
    if len(truth) == 0:
        raise ValueError("empty input")
    tp = int(np.sum((truth == 1) & (pred == 1)))
    tn = int(np.sum((truth == 0) & (pred == 0)))
    fp = int(np.sum((truth == 0) & (pred == 1)))
    fn = int(np.sum((truth == 1) & (pred == 0)))
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


# ---------------------------------------------------------------------------
# Classifier tuning on real data (cached per dataset+endpoint)

TUNING_GRID = {
    "n_trees": (50, 100, 200, 400),
    "max_depth": (2, 3, 4, 6),
    "min_samples_leaf": (1, 5, 20),
    "subsample_fraction": (0.7, 1.0),
}
LEARNING_RATE_RANGE = (0.01, 0.3)

_TUNE_CACHE: dict[tuple[str, str], ClassifierSpec] = {}


def dataset_digest(ds: Dataset) -> str:
    """Stable content hash of schema plus column data."""
    h = hashlib.sha256()
    for col in ds.schema:
        h.update(f"{col.name}|{col.kind}|{sorted(col.roles)}|{col.missing_allowed};".encode())
        values = ds.columns[col.name]
        if col.kind == "categorical":
            for v in values:
                h.update(b"\x00" if v is None else str(v).encode())
                h.update(b"\x1f")
        else:
            h.update(np.ascontiguousarray(values, dtype=np.float64).tobytes())
    return h.hexdigest()


def _sample_spec(rng: np.random.Generator, seed: int) -> ClassifierSpec:
    lo, hi = LEARNING_RATE_RANGE
    return ClassifierSpec(
        n_trees=int(rng.choice(TUNING_GRID["n_trees"])),
        max_depth=int(rng.choice(TUNING_GRID["max_depth"])),
        learning_rate=float(np.exp(rng.uniform(math.log(lo), math.log(hi)))),
        min_samples_leaf=int(rng.choice(TUNING_GRID["min_samples_leaf"])),
        subsample_fraction=float(rng.choice(TUNING_GRID["subsample_fraction"])),
        seed=seed,
    )


def cv_mcc(ds: Dataset, endpoint: EndpointSpec, spec: ClassifierSpec, k: int, seed: int) -> float:
    scores = []
    for train, holdout in kfold(ds, k, seed):
        try:
            clf = fit_classifier(train, endpoint, spec)
        except ValueError:
            scores.append(0.0)
            continue
        kept, truth, _ = _labelled_rows(holdout, endpoint)
        if kept.n_rows == 0:
            scores.append(0.0)
            continue
        scores.append(mcc(truth.astype(np.int64), clf.predict(kept)))
    return float(np.mean(scores))


def tune_classifier(
    real_train: Dataset,
    endpoint: EndpointSpec,
    budget: int = 30,
    seed: int = 0,
    cv_folds: int = 5,
    cache_path: str | None = None,
) -> ClassifierSpec:
    """Random-search the tuning grid with k-fold CV MCC on real data.

    The winning spec is cached per (dataset digest, endpoint label), in
    memory and optionally in a JSON file beside the dataset, and reused for
    every later call with the same key.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    key = (dataset_digest(real_train), endpoint.label_column)
    if key in _TUNE_CACHE:
        return _TUNE_CACHE[key]
    if cache_path and os.path.exists(cache_path):
        with open(cache_path, "r", encoding="utf-8") as fh:
            stored = json.load(fh)
        entry = stored.get(f"{key[0]}:{key[1]}")
        if entry:
            spec = ClassifierSpec(**entry)
            _TUNE_CACHE[key] = spec
            return spec

    rng = np.random.default_rng(seed)
    best_spec = None
    best_score = -math.inf
    for _ in range(budget):
        spec = _sample_spec(rng, seed)
        score = cv_mcc(real_train, endpoint, spec, cv_folds, seed)
        if score > best_score:
            best_score = score
            best_spec = spec
    assert best_spec is not None
    _TUNE_CACHE[key] = best_spec
    if cache_path:
        stored = {}
        if os.path.exists(cache_path):
            with open(cache_path, "r", encoding="utf-8") as fh:
                stored = json.load(fh)
        stored[f"{key[0]}:{key[1]}"] = best_spec.as_dict()
        with open(cache_path, "w", encoding="utf-8") as fh:
            json.dump(stored, fh, indent=2)
    return best_spec


def clear_tuning_cache() -> None:
    _TUNE_CACHE.clear()


def ml_efficiency(
    syn: Dataset,
    real_test: Dataset,
    endpoint: EndpointSpec,
    spec: ClassifierSpec,
) -> MetricValue:
    """MCC on the real test set of a classifier trained on synthetic data only.

    The value is the absolute MCC (it may exceed what a real-trained model
    achieves). Single-class synthetic labels yield 0 with a degeneracy note.
    """
    kept_test, truth, _ = _labelled_rows(real_test, endpoint)
    if kept_test.n_rows == 0:
        raise ValueError("real test set has no labelled rows")
    try:
        clf = fit_classifier(syn, endpoint, spec)
    except ValueError as exc:
        return MetricValue("ml_efficiency", 0.0, note=f"degenerate model: {exc}")
    value = mcc(truth.astype(np.int64), clf.predict(kept_test))
    return MetricValue("ml_efficiency", value)
