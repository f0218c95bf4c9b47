from __future__ import annotations

import math

import numpy as np
import pytest

from synthtrials.dataspec import ColumnSchema, Dataset
from synthtrials.metrics import (
    KMeansConfig,
    MetricReport,
    MetricValue,
    SpmseConfig,
    _rel_err,
    basic_statistical_measure,
    compound_score,
    correlation_ratio,
    fit_logistic_ridge,
    kmeans_score,
    kmeans_score_from_centroids,
    log_correlation_score,
    pearson_corr,
    regularized_support_coverage,
    spmse_index,
    spmse_score,
    theils_u,
)

LN2 = math.log(2.0)


def num_ds(**cols):
    schema = tuple(ColumnSchema(n, "float") for n in cols)
    return Dataset(schema, {n: np.asarray(v, dtype=np.float64) for n, v in cols.items()})


def cat_ds(**cols):
    schema = tuple(ColumnSchema(n, "categorical") for n in cols)
    return Dataset(schema, {n: np.array(list(v), dtype=object) for n, v in cols.items()})


# ---------------------------------------------------------------------------
# basic statistical measure


def test_bsm_identity():
    ds = num_ds(a=[1.0, 2.0, 3.0], b=[5.0, 5.0, 9.0])
    assert basic_statistical_measure(ds, ds).value == pytest.approx(1.0, abs=1e-12)


def test_bsm_hand_case():
    real = num_ds(a=[8.0, 10.0, 12.0])  # mean 10, median 10, sample std 2
    lo = (17 - math.sqrt(13)) / 2
    hi = (17 + math.sqrt(13)) / 2
    syn = num_ds(a=[lo, 10.0, hi])  # mean 9, median 10, sample std 2
    assert np.mean(syn.column("a")) == pytest.approx(9.0, abs=1e-12)
    assert np.median(syn.column("a")) == pytest.approx(10.0, abs=1e-12)
    assert np.std(syn.column("a"), ddof=1) == pytest.approx(2.0, abs=1e-12)
    got = basic_statistical_measure(real, syn).value
    assert got == pytest.approx(1.0 - 0.1 / 3.0, abs=1e-9)


def test_bsm_cap_arithmetic():
    # relative errors cap at 1: stats (25, exact, exact) score 1 - 1/3
    errors = [_rel_err(25.0, 10.0), _rel_err(10.0, 10.0), _rel_err(2.0, 2.0)]
    assert errors == [1.0, 0.0, 0.0]
    assert 1.0 - np.mean(errors) == pytest.approx(2.0 / 3.0, abs=1e-9)


def test_bsm_requires_numeric():
    ds = cat_ds(c="abab")
    with pytest.raises(ValueError, match="numeric"):
        basic_statistical_measure(ds, ds)


def test_bsm_row_permutation_invariant():
    rng = np.random.default_rng(0)
    real = num_ds(a=rng.normal(size=50), b=rng.normal(size=50))
    syn = num_ds(a=rng.normal(size=50), b=rng.normal(size=50))
    perm = syn.take(rng.permutation(50))
    assert basic_statistical_measure(real, syn).value == pytest.approx(
        basic_statistical_measure(real, perm).value, abs=1e-12
    )


# ---------------------------------------------------------------------------
# regularized support coverage


def test_coverage_identity():
    ds = cat_ds(c="aaabbbbcc")
    assert regularized_support_coverage(ds, ds).value == pytest.approx(1.0, abs=1e-12)


def test_coverage_missing_category():
    real = cat_ds(c="aaaaaaaaab")  # A 0.9, B 0.1
    syn = cat_ds(c="aaaaaaaaaa")
    got = regularized_support_coverage(real, syn).value
    assert got == pytest.approx(0.5, abs=1e-9)


def test_coverage_partial():
    real = cat_ds(c="a" * 9 + "b")
    syn = cat_ds(c="a" * 8 + "bb")
    got = regularized_support_coverage(real, syn).value
    assert got == pytest.approx(((0.8 / 0.9) + 1.0) / 2.0, abs=1e-9)


def test_coverage_numeric_binning():
    real = num_ds(x=list(np.linspace(0.0, 10.0, 100)))
    out_of_range = num_ds(x=[-50.0] * 50 + [60.0] * 50)  # clips onto the edge bins
    got = regularized_support_coverage(real, out_of_range, bins=10).value
    # edge bins each hold 0.1 of real mass and are saturated; 8 inner bins empty
    assert got == pytest.approx(0.2, abs=1e-9)


def test_coverage_rare_category_emphasis():
    real = cat_ds(c="a" * 98 + "bb")
    syn_drops_rare = cat_ds(c="a" * 100)
    syn_drops_common = cat_ds(c="a" * 96 + "bbbb")
    # losing the rare category costs half the score; oversampling it costs nothing
    assert regularized_support_coverage(real, syn_drops_rare).value == pytest.approx(0.5, abs=1e-9)
    assert regularized_support_coverage(real, syn_drops_common).value == pytest.approx(
        (96 / 98 + 1.0) / 2.0, abs=1e-9
    )


# ---------------------------------------------------------------------------
# pairwise associations


def test_pearson_exact_lines():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert pearson_corr(x, x) == pytest.approx(1.0, abs=1e-12)
    assert pearson_corr(x, -x) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_hand_case():
    assert pearson_corr([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(0.6, abs=1e-9)


def test_pearson_constant_is_zero():
    assert pearson_corr([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) == 0.0


def test_pearson_too_few_pairs():
    with pytest.raises(ValueError, match="pairs"):
        pearson_corr([1.0, np.nan], [2.0, 3.0])


def test_correlation_ratio_cases():
    assert correlation_ratio(list("abab"), [1.0, 1.0, 2.0, 2.0]) == 0.0
    got = correlation_ratio(list("aabb"), [1.0, 2.0, 3.0, 4.0])
    assert got == pytest.approx(math.sqrt(4.0 / 5.0), abs=1e-9)
    assert correlation_ratio(list("aabb"), [1.0, 1.0, 5.0, 5.0]) == pytest.approx(1.0, abs=1e-12)


def test_theils_u_cases():
    assert theils_u(list("aabb"), list("aabb")) == pytest.approx(1.0, abs=1e-12)
    # independent product table
    x = list("aabb" * 3)
    y = list("pqpq" * 3)
    assert theils_u(x, y) == pytest.approx(0.0, abs=1e-12)
    # hand entropy case, computed in bits (the ratio is base-invariant)
    h_cond = 0.75 * (-(2 / 3) * math.log2(2 / 3) - (1 / 3) * math.log2(1 / 3))
    expected = (1.0 - h_cond) / 1.0
    assert theils_u(list("aabb"), list("pppq")) == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx(0.3113, abs=5e-5)


def test_theils_u_asymmetric():
    x = list("aabb")
    y = list("pqrr")
    assert theils_u(x, y) == pytest.approx(1.0, abs=1e-12)
    hy = -(0.25 * math.log(0.25) + 0.25 * math.log(0.25) + 0.5 * math.log(0.5))
    expected = (hy - 0.5 * LN2) / hy
    assert theils_u(y, x) == pytest.approx(expected, abs=1e-9)
    assert theils_u(y, x) != pytest.approx(theils_u(x, y), abs=1e-3)


def test_theils_u_constant_zero():
    assert theils_u(list("aaaa"), list("pqpq")) == 0.0


# ---------------------------------------------------------------------------
# log correlation score


def test_log_correlation_identity():
    rng = np.random.default_rng(1)
    ds = num_ds(a=rng.normal(size=40), b=rng.normal(size=40))
    assert log_correlation_score(ds, ds).value == pytest.approx(1.0, abs=1e-12)


def test_log_correlation_endpoints():
    x = [1.0, 2.0, 3.0, 4.0]
    real = num_ds(a=x, b=x)  # association exactly 1
    syn = num_ds(a=x, b=[1.0, -1.0, -1.0, 1.0])  # association exactly 0
    assert log_correlation_score(real, syn).value == pytest.approx(0.0, abs=1e-9)


def test_log_correlation_hand_case():
    # eta exactly 0.5 in real, exactly 0.3 in syn, via crafted group spreads
    def eta_pair(target):
        d = 1.0
        s = d * math.sqrt(1.0 / target**2 - 1.0)
        cats = np.array(["A", "A", "B", "B"], dtype=object)
        nums = np.array([-d - s, -d + s, d - s, d + s])
        return cats, nums

    cats_r, nums_r = eta_pair(0.5)
    cats_s, nums_s = eta_pair(0.3)
    assert correlation_ratio(list(cats_r), nums_r) == pytest.approx(0.5, abs=1e-12)
    assert correlation_ratio(list(cats_s), nums_s) == pytest.approx(0.3, abs=1e-12)
    schema = (ColumnSchema("g", "categorical"), ColumnSchema("v", "float"))
    real = Dataset(schema, {"g": cats_r, "v": nums_r})
    syn = Dataset(schema, {"g": cats_s, "v": nums_s})
    expected = 1.0 - abs(math.log1p(0.5) - math.log1p(0.3)) / LN2
    assert log_correlation_score(real, syn).value == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx(0.7935, abs=5e-5)


def test_log_correlation_single_column():
    ds = num_ds(a=[1.0, 2.0])
    with pytest.raises(ValueError, match="two columns"):
        log_correlation_score(ds, ds)


def test_log_correlation_min_association_knob():
    x = [1.0, 2.0, 3.0, 4.0]
    real = num_ds(a=x, b=[1.0, -1.0, -1.0, 1.0])
    syn = num_ds(a=x, b=[1.05, -1.0, -1.1, 1.0])
    full = log_correlation_score(real, syn).value
    gated = log_correlation_score(real, syn, min_association=0.2)
    assert full < 1.0
    assert gated.value == 1.0  # the only pair sits below the threshold on both sides


# ---------------------------------------------------------------------------
# S_pMSE


def test_spmse_score_formula():
    assert spmse_score(1.2, 1.0) == 1.0
    assert spmse_score(0.7, 1.0) == 1.0
    assert spmse_score(2.4, 1.0) == pytest.approx(0.5, abs=1e-12)
    assert spmse_score(0.0, 1.0) == 1.0


def test_spmse_perfect_separation_quarter():
    # widely separated classes: every propensity saturates, pMSE -> 0.25 at c=0.5
    n = 60
    real = num_ds(a=list(np.linspace(0.0, 1.0, n)))
    syn = num_ds(a=list(np.linspace(1000.0, 1001.0, n)))
    cfg = SpmseConfig(l2_lambda=1e-12, max_iterations=5000, tolerance=1e-12, permutations=1)
    result = spmse_index(real, syn, cfg, seed=0)
    assert result.c == pytest.approx(0.5, abs=1e-12)
    assert result.pmse == pytest.approx(0.25, abs=1e-6)


def test_spmse_identity_high():
    rng = np.random.default_rng(2)
    ds = num_ds(a=rng.normal(size=120), b=rng.normal(size=120))
    result = spmse_index(ds, ds, seed=0)
    assert result.score >= 0.99


def test_spmse_duplication_stability():
    rng = np.random.default_rng(3)
    real = num_ds(a=list(rng.normal(size=100)))
    syn = num_ds(a=list(rng.normal(0.8, 1.0, size=100)))
    base = spmse_index(real, syn, seed=1).score
    real2 = real.take(list(range(100)) * 2)
    syn2 = syn.take(list(range(100)) * 2)
    doubled = spmse_index(real2, syn2, seed=1).score
    assert abs(base - doubled) <= 0.15


def test_logistic_ridge_recovers_signal():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(400, 3))
    z = 2.0 * X[:, 0] - 1.0 * X[:, 2]
    y = (rng.random(400) < 1.0 / (1.0 + np.exp(-z))).astype(float)
    w, b, ok = fit_logistic_ridge(X, y, l2=1e-4)
    assert ok
    assert w[0] > 1.0 and w[2] < -0.4 and abs(w[1]) < 0.4


# ---------------------------------------------------------------------------
# k-means score


def _clustered(centers, counts, jitter, seed):
    rng = np.random.default_rng(seed)
    vals = []
    for c, k in zip(centers, counts):
        vals.extend(c + jitter * rng.standard_normal(k))
    return num_ds(x=vals)


def test_kmeans_identity():
    ds = _clustered(range(0, 100, 10), [20] * 10, 0.1, seed=5)
    assert kmeans_score(ds, ds, KMeansConfig(seed=0)).value == pytest.approx(1.0, abs=1e-12)


def test_kmeans_collapsed_synthetic():
    real = _clustered(range(0, 100, 10), [20] * 10, 0.05, seed=6)
    syn = _clustered([50], [200], 0.05, seed=7)
    got = kmeans_score(real, syn, KMeansConfig(seed=0)).value
    assert got == pytest.approx(0.1, abs=1e-9)


def test_kmeans_proportion_caps():
    real_labels = np.repeat(np.arange(10), 10)
    syn_labels = np.concatenate([np.zeros(20, dtype=np.int64), np.repeat(np.arange(2, 10), 10)])
    got = kmeans_score_from_centroids(real_labels, syn_labels, 10)
    assert got.value == pytest.approx(0.9, abs=1e-12)


def test_kmeans_monotone_mass_shift():
    real_labels = np.repeat(np.arange(10), 10)
    over = np.concatenate([np.zeros(30, dtype=np.int64), np.repeat(np.arange(1, 8), 10)])
    before = kmeans_score_from_centroids(real_labels, over, 10).value
    # move 10 rows from the over-represented cluster 0 to the empty cluster 8
    moved = over.copy()
    moved[:10] = 8
    after = kmeans_score_from_centroids(real_labels, moved, 10).value
    assert after > before


def test_kmeans_requires_enough_rows():
    ds = num_ds(x=[1.0, 2.0])
    with pytest.raises(ValueError, match="at least"):
        kmeans_score(ds, ds, KMeansConfig(k=10))


def test_kmeans_syn_permutation_invariant():
    real = _clustered(range(0, 60, 10), [15] * 6, 0.2, seed=8)
    syn = _clustered(range(0, 60, 10), [10] * 6, 0.3, seed=9)
    perm = syn.take(np.random.default_rng(0).permutation(syn.n_rows))
    a = kmeans_score(real, syn, KMeansConfig(seed=1)).value
    b = kmeans_score(real, perm, KMeansConfig(seed=1)).value
    assert a == pytest.approx(b, abs=1e-12)


# ---------------------------------------------------------------------------
# compound score


def test_compound_examples():
    vals = [MetricValue(n, v) for n, v in zip("abcd", (0.2, 0.9, 0.6, 0.7))]
    weights = {n: 1.0 for n in "abcd"}
    assert compound_score(vals, weights) == pytest.approx(0.6, abs=1e-12)
    same = [MetricValue(n, 0.5) for n in "abc"]
    assert compound_score(same, {n: 2.0 for n in "abc"}) == 0.5
    assert compound_score([MetricValue("x", 0.37)], {"x": 1.0}) == 0.37


def test_compound_weight_mismatch():
    vals = [MetricValue("a", 0.2)]
    with pytest.raises(ValueError, match="match"):
        compound_score(vals, {"a": 1.0, "b": 1.0})
    with pytest.raises(ValueError, match="nonnegative"):
        compound_score(vals, {"a": 0.0})


def test_report_rejects_duplicates():
    with pytest.raises(ValueError, match="duplicate"):
        MetricReport(values=(MetricValue("a", 0.1), MetricValue("a", 0.2)))
