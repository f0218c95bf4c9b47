"""Kaplan-Meier estimation and the three curve-comparison scores.

The product-limit estimator drops only at event times; ties process events
before censorings. Curves are compared as step functions on the union of
their drop times, restricted to the shorter curve's observation horizon
(beyond it the estimate is undefined, and horizon deficit is scored
separately by short-sightedness).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataspec import Dataset, SurvivalColumns


@dataclass(frozen=True)
class KMCurve:
    times: np.ndarray  # strictly increasing event times with at least one event
    surv: np.ndarray  # survival probability just after each drop
    n_at_risk: np.ndarray
    max_observed_time: float  # includes censoring times

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        """Step-function value S(t); S = 1 before the first drop."""
        idx = np.searchsorted(self.times, t, side="right")
        return np.concatenate([[1.0], self.surv])[idx]


@dataclass(frozen=True)
class SurvivalScores:
    optimism_raw: float
    shortsight_raw: float
    divergence_raw: float
    optimism_score: float
    shortsight_score: float
    divergence_score: float
    survival_metric: float
    excluded_rows: int = 0
    empty_grid: bool = False

    def as_dict(self) -> dict:
        return {
            "optimism": self.optimism_score,
            "short_sightedness": self.shortsight_score,
            "km_divergence": self.divergence_score,
            "survival_metric": self.survival_metric,
            "raw": {
                "optimism": self.optimism_raw,
                "short_sightedness": self.shortsight_raw,
                "km_divergence": self.divergence_raw,
            },
        }


def km_estimate(times: np.ndarray, events: np.ndarray) -> KMCurve:
    """Product-limit survival estimate from times and event flags (1=event, 0=censored)."""
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=np.float64)
    if len(times) != len(events):
        raise ValueError("length mismatch")
    if len(times) == 0:
        raise ValueError("empty input")
    if np.any(times < 0):
        raise ValueError("negative time")
    if not set(np.unique(events)) <= {0.0, 1.0}:
        raise ValueError("events must be 0 or 1")

    order = np.argsort(times, kind="stable")
    t_sorted = times[order]
    e_sorted = events[order]
    drop_times = []
    surv_vals = []
    at_risk_vals = []
    s = 1.0
    n = len(times)
    i = 0
    at_risk = n
    while i < n:
        t = t_sorted[i]
        j = i
        d = 0
        while j < n and t_sorted[j] == t:
            d += int(e_sorted[j])
            j += 1
        if d > 0:
            s *= 1.0 - d / at_risk
            drop_times.append(t)
            surv_vals.append(s)
            at_risk_vals.append(at_risk)
        at_risk -= j - i
        i = j
    return KMCurve(
        times=np.array(drop_times),
        surv=np.array(surv_vals),
        n_at_risk=np.array(at_risk_vals, dtype=np.int64),
        max_observed_time=float(np.max(times)),
    )


def _comparison_grid(real: KMCurve, syn: KMCurve) -> np.ndarray:
    horizon = min(real.max_observed_time, syn.max_observed_time)
    grid = np.union1d(real.times, syn.times)
    return grid[grid <= horizon]


def km_divergence(real: KMCurve, syn: KMCurve) -> tuple[float, float]:
    """Mean absolute curve difference on the shared grid; score = 1 - raw."""
    grid = _comparison_grid(real, syn)
    if len(grid) == 0:
        return 0.0, 1.0
    raw = float(np.mean(np.abs(syn.evaluate(grid) - real.evaluate(grid))))
    return raw, 1.0 - raw


def optimism(real: KMCurve, syn: KMCurve) -> tuple[float, float]:
    """Mean signed curve difference (synthetic minus real); score = 1 - |raw|."""
    grid = _comparison_grid(real, syn)
    if len(grid) == 0:
        return 0.0, 1.0
    raw = float(np.mean(syn.evaluate(grid) - real.evaluate(grid)))
    return raw, 1.0 - abs(raw)


def short_sightedness(real: KMCurve, syn: KMCurve) -> tuple[float, float]:
    """Relative horizon deficit max(0, (T_real - T_syn) / T_real); score = 1 - raw."""
    if real.max_observed_time <= 0:
        raise ValueError("real horizon must be positive")
    raw = max(0.0, (real.max_observed_time - syn.max_observed_time) / real.max_observed_time)
    return raw, 1.0 - raw


def _curve_inputs(ds: Dataset, sc: SurvivalColumns) -> tuple[np.ndarray, np.ndarray, int]:
    for name in (sc.ostm, sc.osstat):
        if name not in ds.columns:
            raise ValueError(f"survival column {name!r} not present")
    t = ds.column(sc.ostm).astype(np.float64)
    e = ds.column(sc.osstat).astype(np.float64)
    ok = np.isfinite(t) & np.isfinite(e) & (t >= 0)
    return t[ok], e[ok], int(np.sum(~ok))


def survival_metric(real: Dataset, syn: Dataset, sc: SurvivalColumns) -> SurvivalScores:
    """Average of the optimism, short-sightedness, and KM-divergence scores.

    Curves come from (OSTM, OSSTAT). Synthetic rows with non-finite or
    negative time are excluded from the curve and counted; an entirely
    unusable synthetic column scores 0.
    """
    rt, re, _ = _curve_inputs(real, sc)
    if len(rt) == 0:
        raise ValueError("real dataset has no usable survival rows")
    st, se, excluded = _curve_inputs(syn, sc)
    real_curve = km_estimate(rt, re)
    if len(st) == 0:
        return SurvivalScores(-1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, excluded_rows=excluded)
    syn_curve = km_estimate(st, se)
    div_raw, div_score = km_divergence(real_curve, syn_curve)
    opt_raw, opt_score = optimism(real_curve, syn_curve)
    ss_raw, ss_score = short_sightedness(real_curve, syn_curve)
    grid_empty = len(_comparison_grid(real_curve, syn_curve)) == 0
    metric = (opt_score + ss_score + div_score) / 3.0
    return SurvivalScores(
        optimism_raw=opt_raw,
        shortsight_raw=ss_raw,
        divergence_raw=div_raw,
        optimism_score=opt_score,
        shortsight_score=ss_score,
        divergence_score=div_score,
        survival_metric=metric,
        excluded_rows=excluded,
        empty_grid=grid_empty,
    )
