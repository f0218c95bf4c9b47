"""Deterministic demo data shaped like a small AIDS clinical-trial table.

15 columns (6 binary, 4 categorical, 4 integer, 1 float), no missing cells,
valid under every survival rule, with a configurable share of rows whose
event-free and overall survival times match exactly. Used by the test suite
and handy for trying the CLI without real data.
"""

from __future__ import annotations

import numpy as np

from .dataspec import ColumnSchema, Dataset, SurvivalColumns

KARNOF_LEVELS = ("70", "80", "90", "100")
KARNOF_CD4_MEAN = {"70": 15.0, "80": 35.0, "90": 65.0, "100": 95.0}


def actg_schema() -> tuple[ColumnSchema, ...]:
    outcome = frozenset({"outcome", "survival_status"})
    time_role = frozenset({"survival_time"})
    return (
        ColumnSchema("tx", "binary"),
        ColumnSchema("sex", "binary"),
        ColumnSchema("hemophil", "binary"),
        ColumnSchema("prior_zdv", "binary"),
        ColumnSchema("osstat", "binary", roles=outcome),
        ColumnSchema("efsstat", "binary", roles=outcome),
        ColumnSchema("raceth", "categorical"),
        ColumnSchema("karnof", "categorical"),
        ColumnSchema("txgrp", "categorical"),
        ColumnSchema("site", "categorical"),
        ColumnSchema("age", "integer"),
        ColumnSchema("cd4", "integer"),
        ColumnSchema("ostm", "integer", roles=time_role),
        ColumnSchema("efstm", "integer", roles=time_role),
        ColumnSchema("wtkg", "float"),
    )


def survival_columns() -> SurvivalColumns:
    return SurvivalColumns(ostm="ostm", efstm="efstm", osstat="osstat", efsstat="efsstat")


def actg_like(n: int = 1151, seed: int = 0, match_rate: float = 0.93) -> Dataset:
    """Generate n valid rows; match_rate controls the EFSTM = OSTM share."""
    rng = np.random.default_rng(seed)
    schema = actg_schema()

    tx = rng.binomial(1, 0.49, n).astype(np.float64)
    sex = rng.binomial(1, 0.84, n).astype(np.float64)
    hemophil = rng.binomial(1, 0.04, n).astype(np.float64)
    prior_zdv = rng.binomial(1, 0.59, n).astype(np.float64)

    raceth = rng.choice(
        ["white", "black", "hispanic", "asian", "other"], size=n, p=[0.50, 0.28, 0.16, 0.03, 0.03]
    )
    karnof = rng.choice(KARNOF_LEVELS, size=n, p=[0.06, 0.14, 0.30, 0.50])
    txgrp = np.where(
        tx == 1,
        rng.choice(["2", "3"], size=n, p=[0.7, 0.3]),
        rng.choice(["1", "3"], size=n, p=[0.8, 0.2]),
    )
    site = rng.choice(["A", "B", "C"], size=n, p=[0.5, 0.3, 0.2])

    age = np.clip(np.round(rng.normal(38, 9, n)), 18, 75)
    cd4_mean = np.array([KARNOF_CD4_MEAN[k] for k in karnof])
    cd4 = rng.poisson(cd4_mean).astype(np.float64)
    wtkg = np.round(rng.normal(72, 13, n) + 6.0 * sex, 1)

    # survival: longer expected event time with higher cd4/karnof, uniform censoring
    karnof_num = karnof.astype(np.float64)
    mean_event = 220.0 + 16.0 * cd4 + 4.0 * (karnof_num - 70.0) + 80.0 * tx
    t_event = rng.exponential(mean_event)
    censor = rng.uniform(80, 380, n)
    ostm = np.maximum(1.0, np.ceil(np.minimum(t_event, censor)))
    osstat = (t_event <= censor).astype(np.float64)

    # sicker patients (low cd4) are likelier to hit a distinct earlier event;
    # the multiplier is centered so the overall match share stays near match_rate
    mismatch = np.clip((1.0 - match_rate) * (1.87 - 0.012 * cd4), 0.0, 1.0)
    matched = rng.random(n) >= mismatch
    early_frac = rng.uniform(0.25, 0.9, n)
    efstm_unmatched = np.maximum(1.0, np.floor(ostm * early_frac))
    # an earlier distinct event is impossible when ostm is 1 day
    matched = matched | (efstm_unmatched >= ostm)
    efstm = np.where(matched, ostm, efstm_unmatched)
    efsstat = np.where(matched, osstat, 1.0)

    columns = {
        "tx": tx,
        "sex": sex,
        "hemophil": hemophil,
        "prior_zdv": prior_zdv,
        "osstat": osstat,
        "efsstat": efsstat,
        "raceth": raceth.astype(object),
        "karnof": karnof.astype(object),
        "txgrp": txgrp.astype(object),
        "site": site.astype(object),
        "age": age.astype(np.float64),
        "cd4": cd4,
        "ostm": ostm,
        "efstm": efstm,
        "wtkg": wtkg,
    }
    return Dataset(schema, columns)


def plant_invalid(syn: Dataset, frac: float = 0.2) -> Dataset:
    """Make ~frac of the rows V5-invalid: flip EFSSTAT on the smallest-OSTM
    rows among the censored exact matches.

    The flip shifts the EFSSTAT frequency (visible to the propensity model)
    without touching any numeric column, while removing the flipped rows
    truncates the lower OSTM tail (visible to the statistical measures).
    """
    ostm = syn.column("ostm")
    efstm = syn.column("efstm")
    osstat = syn.column("osstat")
    efsstat = syn.column("efsstat").copy()
    pool = np.where((ostm == efstm) & (osstat == 0))[0]
    pool = pool[np.argsort(ostm[pool], kind="stable")]
    k = min(int(round(frac * syn.n_rows)), len(pool))
    efsstat[pool[:k]] = 1.0
    return syn.replace_column("efsstat", efsstat)


def constraint_fixture() -> tuple[Dataset, dict[str, int]]:
    """100-row dataset with planted rule violations and the hand-enumerated
    violation counts: 5 V1, 3 V2, 10 V3, 4 V5, 6 V6, overlapping into 22 V7.

    Layout (row indices):
      0-1   ostm=-1, efstm=5          -> V1, V3
      2-3   ostm=-2, efstm=-3         -> V1, V2
      4     ostm=-1, efstm=-1         -> V1, V2 (statuses equal, no V5)
      5-12  ostm=10, efstm=12         -> V3
      13-15 ostm=efstm=20, stat clash -> V5
      16    stat clash and age=-3     -> V5, V6
      17-21 age=-3                    -> V6
    """
    ds = actg_like(n=100, seed=123)
    ostm = ds.column("ostm").copy()
    efstm = ds.column("efstm").copy()
    osstat = ds.column("osstat").copy()
    efsstat = ds.column("efsstat").copy()
    age = ds.column("age").copy()

    for i in (0, 1):
        ostm[i], efstm[i] = -1.0, 5.0
    for i in (2, 3):
        ostm[i], efstm[i] = -2.0, -3.0
    ostm[4], efstm[4] = -1.0, -1.0
    osstat[4], efsstat[4] = 1.0, 1.0
    for i in range(5, 13):
        ostm[i], efstm[i] = 10.0, 12.0
    for i in range(13, 17):
        ostm[i], efstm[i] = 20.0, 20.0
        osstat[i], efsstat[i] = 1.0, 0.0
    for i in range(16, 22):
        age[i] = -3.0

    out = (
        ds.replace_column("ostm", ostm)
        .replace_column("efstm", efstm)
        .replace_column("osstat", osstat)
        .replace_column("efsstat", efsstat)
        .replace_column("age", age)
    )
    expected = {"V1": 5, "V2": 3, "V3": 10, "V4": 13, "V5": 4, "V6": 6, "V7": 22}
    return out, expected
