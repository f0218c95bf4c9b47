"""Row-level survival validity rules V1-V7 and OSTM=EFSTM match ratios.

V1: OSTM > 0. V2: EFSTM > 0. V3: OSTM >= EFSTM. V4 = V1 and V2 and V3.
V5: OSTM = EFSTM implies OSSTAT = EFSSTAT. V6: listed numeric columns are
nonnegative. V7 = V4 and V5 and V6 ("valid patient"). A missing survival
cell fails every rule that reads it; missing cells in V6 columns are
allowed data, not violations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataspec import Dataset, SurvivalColumns

RULE_IDS = ("V1", "V2", "V3", "V4", "V5", "V6", "V7")


@dataclass(frozen=True)
class ConstraintReport:
    n_rows: int
    violations: dict[str, int]
    valid_mask: np.ndarray  # True where the row passes V7

    @property
    def rates(self) -> dict[str, float]:
        if self.n_rows == 0:
            return {r: 0.0 for r in RULE_IDS}
        return {r: self.violations[r] / self.n_rows for r in RULE_IDS}

    def as_dict(self) -> dict:
        return {
            "rows": self.n_rows,
            "violations": dict(self.violations),
            "violation_rates": self.rates,
            "valid_rows": int(np.sum(self.valid_mask)),
        }


@dataclass(frozen=True)
class MatchRatioReport:
    exact: float
    relaxed: float
    tolerance: float

    def as_dict(self) -> dict:
        return {"exact": self.exact, "relaxed": self.relaxed, "tolerance": self.tolerance}


def _survival_arrays(ds: Dataset, sc: SurvivalColumns) -> tuple[np.ndarray, np.ndarray]:
    for name in (sc.ostm, sc.efstm):
        if name not in ds.columns:
            raise KeyError(f"survival column {name!r} not found")
    return ds.column(sc.ostm).astype(np.float64), ds.column(sc.efstm).astype(np.float64)


def validate(
    ds: Dataset, sc: SurvivalColumns, nonneg_cols: Sequence[str] = ()
) -> ConstraintReport:
    """Evaluate V1-V7 per row; nonneg_cols must not list the survival times."""
    if sc.ostm in nonneg_cols or sc.efstm in nonneg_cols:
        raise ValueError("OSTM/EFSTM have their own rules and cannot appear in nonneg_cols")
    ostm, efstm = _survival_arrays(ds, sc)
    for name in (sc.osstat, sc.efsstat):
        if name not in ds.columns:
            raise KeyError(f"survival column {name!r} not found")
    osstat = ds.column(sc.osstat).astype(np.float64)
    efsstat = ds.column(sc.efsstat).astype(np.float64)

    ostm_missing = np.isnan(ostm)
    efstm_missing = np.isnan(efstm)
    v1 = ostm_missing | ~(ostm > 0)
    v2 = efstm_missing | ~(efstm > 0)
    with np.errstate(invalid="ignore"):
        v3 = ostm_missing | efstm_missing | (ostm < efstm)
        equal_times = ~ostm_missing & ~efstm_missing & (ostm == efstm)
    status_bad = np.isnan(osstat) | np.isnan(efsstat) | (osstat != efsstat)
    v5 = ostm_missing | efstm_missing | (equal_times & status_bad)
    v4 = v1 | v2 | v3

    v6 = np.zeros(ds.n_rows, dtype=bool)
    for name in nonneg_cols:
        col = ds.column(name)
        if ds.column_schema(name).kind == "categorical":
            raise ValueError(f"nonnegative rule applies to numeric columns, got {name!r}")
        with np.errstate(invalid="ignore"):
            v6 |= np.asarray(col, dtype=np.float64) < 0
    v7 = v4 | v5 | v6

    violations = {
        "V1": int(v1.sum()),
        "V2": int(v2.sum()),
        "V3": int(v3.sum()),
        "V4": int(v4.sum()),
        "V5": int(v5.sum()),
        "V6": int(v6.sum()),
        "V7": int(v7.sum()),
    }
    return ConstraintReport(n_rows=ds.n_rows, violations=violations, valid_mask=~v7)


def match_ratios(
    ds: Dataset, sc: SurvivalColumns, tolerance: float = 0.95
) -> MatchRatioReport:
    """Exact and relaxed OSTM=EFSTM match fractions.

    A match requires a positive OSTM and EFSTM <= OSTM; relaxed additionally
    admits EFSTM within tolerance*OSTM. When the dataset still carries the
    difference column, exact match means a difference of exactly zero.
    """
    if not (0.0 < tolerance <= 1.0):
        raise ValueError("tolerance must be in (0, 1]")
    if sc.efstm_dif in ds.columns and sc.efstm not in ds.columns:
        ostm = ds.column(sc.ostm).astype(np.float64)
        dif = ds.column(sc.efstm_dif).astype(np.float64)
        efstm = ostm - dif
        exact_eq = ~np.isnan(dif) & (dif == 0)
    else:
        ostm, efstm = _survival_arrays(ds, sc)
        exact_eq = ~np.isnan(ostm) & ~np.isnan(efstm) & (ostm == efstm)
    if ds.n_rows == 0:
        return MatchRatioReport(0.0, 0.0, tolerance)
    with np.errstate(invalid="ignore"):
        positive = ~np.isnan(ostm) & (ostm > 0)
        within = ~np.isnan(efstm) & (efstm <= ostm) & (efstm >= tolerance * ostm)
    exact = positive & exact_eq
    relaxed = positive & within
    return MatchRatioReport(
        exact=float(np.mean(exact)), relaxed=float(np.mean(relaxed)), tolerance=tolerance
    )


def remove_invalid(ds: Dataset, report: ConstraintReport) -> Dataset:
    """Drop rows failing V7, preserving survivor order."""
    if report.n_rows != ds.n_rows:
        raise ValueError("report row count does not match dataset")
    return ds.mask(report.valid_mask)


def repair_matches(ds: Dataset, sc: SurvivalColumns, tolerance: float = 0.95) -> Dataset:
    """Optional postprocess: snap relaxed matches to exact (EFSTM := OSTM).

    Off by default in the pipelines; collapsing near-matches erases any real
    subgroup whose EFSTM sits just below OSTM.
    """
    ostm, efstm = _survival_arrays(ds, sc)
    with np.errstate(invalid="ignore"):
        snap = (
            ~np.isnan(ostm)
            & ~np.isnan(efstm)
            & (ostm > 0)
            & (efstm <= ostm)
            & (efstm >= tolerance * ostm)
        )
    new_efstm = np.where(snap, ostm, efstm)
    return ds.replace_column(sc.efstm, new_efstm)
