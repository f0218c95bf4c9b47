"""Statistical fidelity metrics for synthetic tables.

All metrics here score in [0, 1] (1 best) and compare a synthetic dataset
against a real reference sharing the same schema. Degenerate inputs
(zero variance, zero entropy, too few complete pairs) score association 0
rather than raising, so wide pairwise scans never abort.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import _kernels
from .dataspec import Dataset
from .encoding import EncodingPlan, _discrete_tokens


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float
    note: str | None = None


@dataclass(frozen=True)
class MetricReport:
    values: tuple[MetricValue, ...]
    real_id: str = "real"
    synthetic_id: str = "synthetic"
    seed: int = 0

    def __post_init__(self) -> None:
        names = [v.name for v in self.values]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate metric names in report: {names}")

    def value(self, name: str) -> float:
        for v in self.values:
            if v.name == name:
                return v.value
        raise KeyError(f"metric {name!r} not in report")

    def as_dict(self) -> dict:
        out: dict = {
            "real": self.real_id,
            "synthetic": self.synthetic_id,
            "seed": self.seed,
            "metrics": {v.name: v.value for v in self.values},
        }
        notes = {v.name: v.note for v in self.values if v.note}
        if notes:
            out["notes"] = notes
        return out


@dataclass(frozen=True)
class SpmseConfig:
    alpha: float = 1.2
    permutations: int = 20
    l2_lambda: float = 1e-4
    max_iterations: int = 1000
    tolerance: float = 1e-8

    def __post_init__(self) -> None:
        if self.alpha <= 1:
            raise ValueError("alpha must exceed 1")
        if self.permutations < 1:
            raise ValueError("permutations must be >= 1")


@dataclass(frozen=True)
class PropensityResult:
    pmse: float
    pmse0: float
    c: float
    ratio: float
    score: float
    converged: bool = True


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 10
    restarts: int = 10
    max_iterations: int = 300
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError("k must be >= 2")


# ---------------------------------------------------------------------------
# Basic statistical measure


def _rel_err(syn_stat: float, real_stat: float) -> float:
    return min(1.0, abs(syn_stat - real_stat) / max(abs(real_stat), 1e-12))


def basic_statistical_measure(real: Dataset, syn: Dataset) -> MetricValue:
    """1 minus the mean capped relative error of mean/median/std over numeric columns."""
    names = real.numeric_names()
    if not names:
        raise ValueError("no numeric columns to compare")
    if real.n_rows == 0 or syn.n_rows == 0:
        raise ValueError("empty dataset")
    errors: list[float] = []
    for name in names:
        r = real.column(name)
        s = syn.column(name)
        r = r[~np.isnan(r)]
        s = s[~np.isnan(s)]
        if len(r) == 0:
            continue
        if len(s) == 0:
            errors.extend([1.0, 1.0, 1.0])
            continue
        r_std = float(np.std(r, ddof=1)) if len(r) > 1 else 0.0
        s_std = float(np.std(s, ddof=1)) if len(s) > 1 else 0.0
        errors.append(_rel_err(float(np.mean(s)), float(np.mean(r))))
        errors.append(_rel_err(float(np.median(s)), float(np.median(r))))
        errors.append(_rel_err(s_std, r_std))
    if not errors:
        raise ValueError("no numeric columns with real values")
    return MetricValue("basic_statistical_measure", 1.0 - float(np.mean(errors)))


# ---------------------------------------------------------------------------
# Regularized support coverage


def _bin_index(values: np.ndarray, lo: float, hi: float, bins: int) -> np.ndarray:
    if hi > lo:
        idx = np.floor((values - lo) / (hi - lo) * bins).astype(np.int64)
    else:
        idx = np.zeros(len(values), dtype=np.int64)
    return np.clip(idx, 0, bins - 1)  # out-of-range synthetic values take the edge bins


def _coverage(p_real: np.ndarray, p_syn: np.ndarray) -> float:
    keep = p_real > 0
    return float(np.mean(np.minimum(p_syn[keep] / p_real[keep], 1.0)))


def regularized_support_coverage(real: Dataset, syn: Dataset, bins: int = 10) -> MetricValue:
    """Per-category coverage min(p_syn/p_real, 1), averaged with equal category weight.

    Numeric columns are binned into ``bins`` equal-width intervals over the
    real min-max; discrete columns use their real support, with missing as a
    category of its own.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if real.n_rows == 0:
        raise ValueError("empty real dataset")
    scores: list[float] = []
    for name in real.discrete_names():
        r_tokens = _discrete_tokens(real, name)
        s_tokens = _discrete_tokens(syn, name)
        cats = sorted(set(r_tokens))
        p_real = np.array([r_tokens.count(c) for c in cats], dtype=np.float64) / len(r_tokens)
        p_syn = np.array([s_tokens.count(c) for c in cats], dtype=np.float64)
        p_syn /= max(len(s_tokens), 1)
        scores.append(_coverage(p_real, p_syn))
    for name in real.numeric_names():
        r = real.column(name)
        s = syn.column(name)
        r = r[~np.isnan(r)]
        s = s[~np.isnan(s)]
        if len(r) == 0:
            continue
        lo, hi = float(np.min(r)), float(np.max(r))
        p_real = np.bincount(_bin_index(r, lo, hi, bins), minlength=bins) / len(r)
        if len(s):
            p_syn = np.bincount(_bin_index(s, lo, hi, bins), minlength=bins) / len(s)
        else:
            p_syn = np.zeros(bins)
        scores.append(_coverage(p_real, p_syn))
    if not scores:
        raise ValueError("no columns with real support")
    return MetricValue("support_coverage", float(np.mean(scores)))


# ---------------------------------------------------------------------------
# Pairwise associations


def pearson_corr(x: np.ndarray, y: np.ndarray) -> float:
    """Sample Pearson correlation after pairwise deletion; constant input gives 0."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError("length mismatch")
    keep = ~(np.isnan(x) | np.isnan(y))
    x, y = x[keep], y[keep]
    if len(x) < 2:
        raise ValueError("fewer than 2 complete pairs")
    xd = x - np.mean(x)
    yd = y - np.mean(y)
    vx = float(np.dot(xd, xd))
    vy = float(np.dot(yd, yd))
    if vx == 0.0 or vy == 0.0:
        return 0.0
    return float(np.clip(np.dot(xd, yd) / math.sqrt(vx * vy), -1.0, 1.0))


def correlation_ratio(cat, num) -> float:
    """eta = sqrt(SS_between / SS_total) for a categorical grouping of a numeric series."""
    num = np.asarray(num, dtype=np.float64)
    cat = list(cat)
    if len(cat) != len(num):
        raise ValueError("length mismatch")
    pairs = [(c, v) for c, v in zip(cat, num) if c is not None and not np.isnan(v)]
    if len(pairs) < 2:
        raise ValueError("fewer than 2 complete pairs")
    values = np.array([v for _, v in pairs])
    grand = float(np.mean(values))
    ss_total = float(np.sum((values - grand) ** 2))
    if ss_total == 0.0:
        return 0.0
    groups: dict[str, list[float]] = {}
    for c, v in pairs:
        groups.setdefault(str(c), []).append(v)
    ss_between = sum(len(g) * (float(np.mean(g)) - grand) ** 2 for g in groups.values())
    return float(np.clip(math.sqrt(ss_between / ss_total), 0.0, 1.0))


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def theils_u(x, y) -> float:
    """Uncertainty coefficient U(X|Y) = (H(X) - H(X|Y)) / H(X); zero-entropy X gives 0."""
    x = list(x)
    y = list(y)
    if len(x) != len(y):
        raise ValueError("length mismatch")
    pairs = [(a, b) for a, b in zip(x, y) if a is not None and b is not None]
    if not pairs:
        raise ValueError("no complete pairs")
    xs = [str(a) for a, _ in pairs]
    ys = [str(b) for _, b in pairs]
    x_cats = sorted(set(xs))
    y_cats = sorted(set(ys))
    x_idx = {c: i for i, c in enumerate(x_cats)}
    y_idx = {c: i for i, c in enumerate(y_cats)}
    table = np.zeros((len(x_cats), len(y_cats)))
    for a, b in zip(xs, ys):
        table[x_idx[a], y_idx[b]] += 1
    hx = _entropy(table.sum(axis=1))
    if hx == 0.0:
        return 0.0
    n = table.sum()
    hxy = 0.0
    for j in range(len(y_cats)):
        col = table[:, j]
        cn = col.sum()
        if cn > 0:
            hxy += cn / n * _entropy(col)
    return float(np.clip((hx - hxy) / hx, 0.0, 1.0))


def _columns_as_tokens(ds: Dataset, name: str) -> list[str | None]:
    col = ds.column(name)
    if ds.column_schema(name).kind == "categorical":
        return [None if v is None else str(v) for v in col]
    return [None if np.isnan(v) else str(int(v)) for v in col]


def _pair_association(ds: Dataset, a: str, b: str) -> float:
    """Association in [0,1] for one column pair; degenerate pairs score 0."""
    kind_a = ds.column_schema(a).kind
    kind_b = ds.column_schema(b).kind
    num_a = kind_a in ("integer", "float")
    num_b = kind_b in ("integer", "float")
    try:
        if num_a and num_b:
            return abs(pearson_corr(ds.column(a), ds.column(b)))
        if num_a != num_b:
            num_col, cat_col = (a, b) if num_a else (b, a)
            return correlation_ratio(_columns_as_tokens(ds, cat_col), ds.column(num_col))
        ta = _columns_as_tokens(ds, a)
        tb = _columns_as_tokens(ds, b)
        return 0.5 * (theils_u(ta, tb) + theils_u(tb, ta))
    except ValueError:
        return 0.0


LN2 = math.log(2.0)


def log_correlation_score(
    real: Dataset, syn: Dataset, min_association: float | None = None
) -> MetricValue:
    """Mean over column pairs of 1 - min(1, |ln(1+a_real) - ln(1+a_syn)| / ln 2).

    With ``min_association`` set, pairs where both datasets fall below the
    threshold are skipped.
    """
    names = [c.name for c in real.schema]
    if len(names) < 2:
        raise ValueError("need at least two columns")
    scores = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a_real = _pair_association(real, names[i], names[j])
            a_syn = _pair_association(syn, names[i], names[j])
            if min_association is not None and a_real < min_association and a_syn < min_association:
                continue
            diff = abs(math.log1p(a_real) - math.log1p(a_syn)) / LN2
            scores.append(1.0 - min(1.0, diff))
    if not scores:  # every pair below the threshold still counts as a perfect match
        return MetricValue("log_correlation", 1.0, note="all pairs below min_association")
    return MetricValue("log_correlation", float(np.mean(scores)))


# ---------------------------------------------------------------------------
# Propensity-score MSE index


def fit_logistic_ridge(
    X: np.ndarray,
    y: np.ndarray,
    l2: float = 1e-4,
    max_iterations: int = 1000,
    tolerance: float = 1e-8,
) -> tuple[np.ndarray, float, bool]:
    """Ridge logistic regression via L-BFGS; the intercept is unpenalized.

    Returns (weights, intercept, converged). On non-convergence the last
    iterate is returned.
    """
    n, m = X.shape

    def objective(theta):
        w, b = theta[:m], theta[m]
        z = X @ w + b
        # log(1 + e^z) - y z, numerically stable
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * float(np.dot(w, w))
        p = 1.0 / (1.0 + np.exp(-z))
        grad_w = X.T @ (p - y) / n + l2 * w
        grad_b = float(np.mean(p - y))
        return loss, np.concatenate([grad_w, [grad_b]])

    theta0 = np.zeros(m + 1)
    res = scipy.optimize.minimize(
        objective,
        theta0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iterations, "gtol": tolerance, "ftol": 1e-14},
    )
    return res.x[:m], float(res.x[m]), bool(res.success)


def _pmse(X: np.ndarray, y: np.ndarray, c: float, cfg: SpmseConfig) -> tuple[float, bool]:
    w, b, ok = fit_logistic_ridge(X, y, cfg.l2_lambda, cfg.max_iterations, cfg.tolerance)
    p = 1.0 / (1.0 + np.exp(-(X @ w + b)))
    return float(np.mean((p - c) ** 2)), ok


def spmse_score(pmse: float, pmse0: float, alpha: float = 1.2) -> float:
    """Normalization of the observed/null pMSE pair into [0, 1].

    Ratios up to alpha score 1 (alpha absorbs fitting noise); beyond that the
    score decays as alpha * pmse0 / pmse."""
    if pmse <= 0.0:
        return 1.0
    return min(1.0, alpha * pmse0 / pmse)


def spmse_index(
    real: Dataset, syn: Dataset, cfg: SpmseConfig | None = None, seed: int = 0
) -> PropensityResult:
    """Propensity-MSE index: min(1, alpha * pMSE0 / pMSE).

    pMSE is the mean squared deviation of fitted real-vs-synthetic
    propensities from the synthetic share c; pMSE0 is its permutation-null
    estimate (mean observed pMSE over label-shuffled refits).
    """
    if real.n_rows == 0 or syn.n_rows == 0:
        raise ValueError("both datasets must be nonempty")
    plan = EncodingPlan.fit(real)
    return spmse_index_encoded(plan.transform(real), plan.transform(syn), cfg, seed)


def spmse_index_encoded(
    Xr: np.ndarray, Xs: np.ndarray, cfg: SpmseConfig | None = None, seed: int = 0
) -> PropensityResult:
    """spmse_index on already-encoded row matrices (real first, synthetic second)."""
    cfg = cfg or SpmseConfig()
    if len(Xr) == 0 or len(Xs) == 0:
        raise ValueError("both datasets must be nonempty")
    X = np.vstack([Xr, Xs])
    y = np.concatenate([np.zeros(len(Xr)), np.ones(len(Xs))])
    c = len(Xs) / (len(Xr) + len(Xs))
    pmse, converged = _pmse(X, y, c, cfg)
    rng = np.random.default_rng(seed)
    null_values = []
    for _ in range(cfg.permutations):
        y_perm = rng.permutation(y)
        v, _ = _pmse(X, y_perm, c, cfg)
        null_values.append(v)
    pmse0 = float(np.mean(null_values))
    if pmse <= 0.0:
        ratio = 0.0 if pmse0 > 0 else 1.0
    else:
        ratio = pmse / pmse0 if pmse0 > 0 else math.inf
    return PropensityResult(pmse, pmse0, c, ratio, spmse_score(pmse, pmse0, cfg.alpha), converged)


# ---------------------------------------------------------------------------
# K-means score


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i] = X[rng.integers(n)]
            continue
        probs = d2 / total
        centers[i] = X[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((X - centers[i]) ** 2, axis=1))
    return centers


def fit_kmeans(X: np.ndarray, cfg: KMeansConfig) -> tuple[np.ndarray, np.ndarray, float]:
    """Best-of-restarts k-means on the rows of X: (centers, labels, inertia)."""
    if X.shape[0] < cfg.k:
        raise ValueError(f"need at least k={cfg.k} rows, got {X.shape[0]}")
    rng = np.random.default_rng(cfg.seed)
    best = None
    for _ in range(max(1, cfg.restarts)):
        init = _kmeanspp_init(X, cfg.k, rng)
        centers, labels, inertia = _kernels.lloyd(X, init, cfg.max_iterations)
        if best is None or inertia < best[2]:
            best = (centers, labels, inertia)
    return best


def assign_clusters(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(X * X, axis=1)[:, None]
        - 2.0 * X @ centers.T
        + np.sum(centers * centers, axis=1)[None, :]
    )
    return np.argmin(d2, axis=1)


def kmeans_score_from_centroids(
    real_labels: np.ndarray, syn_labels: np.ndarray, k: int
) -> MetricValue:
    p_real = np.bincount(real_labels, minlength=k) / max(len(real_labels), 1)
    p_syn = np.bincount(syn_labels, minlength=k) / max(len(syn_labels), 1)
    scores = np.empty(k)
    for c in range(k):
        if p_real[c] > 0:
            scores[c] = min(p_syn[c] / p_real[c], 1.0)
        else:
            scores[c] = 1.0 if p_syn[c] == 0 else 0.0
    return MetricValue("kmeans", float(np.mean(scores)))


def kmeans_score(real: Dataset, syn: Dataset, cfg: KMeansConfig | None = None) -> MetricValue:
    """Cluster-frequency match against centroids fixed by the real data only."""
    cfg = cfg or KMeansConfig()
    plan = EncodingPlan.fit(real)
    Xr = plan.transform(real)
    centers, real_labels, _ = fit_kmeans(Xr, cfg)
    syn_labels = assign_clusters(plan.transform(syn), centers)
    return kmeans_score_from_centroids(real_labels, syn_labels, cfg.k)


# ---------------------------------------------------------------------------
# Compound scoring


def compound_score(values: list[MetricValue], weights: dict[str, float]) -> float:
    """Weighted mean of metric values; weights must cover exactly the metrics given."""
    names = [v.name for v in values]
    if set(names) != set(weights):
        raise ValueError(
            f"weights {sorted(weights)} do not match metrics {sorted(names)}"
        )
    w = np.array([weights[n] for n in names], dtype=np.float64)
    if np.any(w < 0) or w.sum() == 0:
        raise ValueError("weights must be nonnegative and not all zero")
    v = np.array([mv.value for mv in values])
    return float(np.dot(w, v) / w.sum())
