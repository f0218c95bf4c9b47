"""Synthetic-data generators: a built-in Gaussian copula and an external
process client speaking the fit_sample protocol.

The copula models every column through a latent standard normal: numeric
marginals are empirical quantile knots (inverse-CDF sampling with optional
jitter), discrete marginals are smoothed category frequencies mapped onto
cumulative-probability intervals. The latent correlation is an empirical
normal-scores correlation shrunk toward independence by ``correlation_shrinkage``.
"""

from __future__ import annotations

import json
import math
import os
import subprocess
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import rankdata

from .dataspec import ColumnSchema, Dataset, DataError, load_csv, schema_to_document, write_csv
from .jsonio import dump_file


class GeneratorFailure(Exception):
    """Any generator-side failure; the HPO loop maps these to a zero-score trial."""


class GeneratorTimeout(GeneratorFailure):
    pass


class InvalidOutput(GeneratorFailure):
    """Output exists but does not conform: bad rows, bad cells, or bad schema."""


@dataclass(frozen=True)
class CopulaParams:
    correlation_shrinkage: float = 0.8  # 0 = full empirical correlation, 1 = independence
    marginal_bins: int = 10
    jitter: float = 0.2
    category_smoothing: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.correlation_shrinkage <= 1.0):
            raise ValueError("correlation_shrinkage must be in [0, 1]")
        if self.marginal_bins < 2:
            raise ValueError("marginal_bins must be >= 2")
        if self.jitter < 0 or self.category_smoothing < 0:
            raise ValueError("jitter and category_smoothing must be nonnegative")

    @classmethod
    def from_mapping(cls, params: dict) -> "CopulaParams":
        base = cls()
        kwargs = {}
        for key in (
            "correlation_shrinkage",
            "marginal_bins",
            "jitter",
            "category_smoothing",
        ):
            if key in params:
                kwargs[key] = params[key]
        unknown = set(params) - set(kwargs)
        if unknown:
            raise ValueError(f"unknown copula hyperparameters: {sorted(unknown)}")
        if "marginal_bins" in kwargs:
            kwargs["marginal_bins"] = int(kwargs["marginal_bins"])
        return cls(
            correlation_shrinkage=float(kwargs.get("correlation_shrinkage", base.correlation_shrinkage)),
            marginal_bins=int(kwargs.get("marginal_bins", base.marginal_bins)),
            jitter=float(kwargs.get("jitter", base.jitter)),
            category_smoothing=float(kwargs.get("category_smoothing", base.category_smoothing)),
        )


@dataclass(frozen=True)
class _NumericMarginal:
    q_probs: np.ndarray
    q_vals: np.ndarray
    span: float  # jitter noise scale: sigma = jitter * span of the fitted knots
    missing_rate: float
    integer: bool


@dataclass(frozen=True)
class _DiscreteMarginal:
    categories: tuple  # None entry stands for a missing cell
    cum_probs: np.ndarray
    binary: bool


@dataclass(frozen=True)
class CopulaModel:
    schema: tuple[ColumnSchema, ...]
    marginals: dict
    chol: np.ndarray  # Cholesky factor of the latent correlation
    params: CopulaParams


def _latent_scores(ds: Dataset, name: str) -> np.ndarray:
    """Per-row normal scores for the latent correlation; NaN where missing."""
    col_schema = ds.column_schema(name)
    n = ds.n_rows
    if col_schema.kind == "categorical":
        raw = ds.column(name)
        tokens = sorted({v for v in raw if v is not None})
        index = {t: i for i, t in enumerate(tokens)}
        vals = np.array([np.nan if v is None else float(index[v]) for v in raw])
    else:
        vals = ds.column(name).astype(np.float64)
    out = np.full(n, np.nan)
    ok = ~np.isnan(vals)
    if np.sum(ok) == 0:
        return out
    ranks = rankdata(vals[ok], method="average")
    out[ok] = ndtri(ranks / (np.sum(ok) + 1.0))
    return out


def _latent_correlation(ds: Dataset, shrinkage: float) -> np.ndarray:
    names = [c.name for c in ds.schema]
    m = len(names)
    scores = np.column_stack([_latent_scores(ds, n) for n in names]) if m else np.zeros((0, 0))
    corr = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            a, b = scores[:, i], scores[:, j]
            ok = ~(np.isnan(a) | np.isnan(b))
            if np.sum(ok) < 2:
                continue
            x = a[ok] - a[ok].mean()
            y = b[ok] - b[ok].mean()
            den = math.sqrt(float(np.dot(x, x)) * float(np.dot(y, y)))
            if den > 0:
                corr[i, j] = corr[j, i] = float(np.dot(x, y)) / den
    corr = (1.0 - shrinkage) * corr + shrinkage * np.eye(m)
    # clip eigenvalues so the Cholesky below always exists
    vals, vecs = np.linalg.eigh(corr)
    vals = np.maximum(vals, 1e-6)
    corr = vecs @ np.diag(vals) @ vecs.T
    d = np.sqrt(np.diag(corr))
    corr = corr / np.outer(d, d)
    return np.linalg.cholesky(corr)


def fit_copula(train: Dataset, params: CopulaParams, seed: int = 0) -> CopulaModel:
    """Fit marginals and the shrunk latent correlation. Deterministic given seed."""
    if train.n_rows == 0:
        raise ValueError("empty training data")
    marginals: dict = {}
    for col in train.schema:
        raw = train.column(col.name)
        if col.kind in ("integer", "float"):
            vals = raw.astype(np.float64)
            ok = vals[~np.isnan(vals)]
            missing_rate = 1.0 - len(ok) / len(vals)
            if len(ok) == 0:
                marginals[col.name] = _NumericMarginal(
                    np.array([0.0, 1.0]), np.zeros(2), 0.0, 1.0, col.kind == "integer"
                )
                continue
            probs = np.linspace(0.0, 1.0, params.marginal_bins)
            knots = np.quantile(ok, probs)
            span = float(knots[-1] - knots[0])
            marginals[col.name] = _NumericMarginal(
                probs, knots, span, missing_rate, col.kind == "integer"
            )
        else:
            if col.kind == "binary":
                tokens = [None if np.isnan(v) else str(int(v)) for v in raw.astype(np.float64)]
            else:
                tokens = [None if v is None else str(v) for v in raw]
            cats = sorted({t for t in tokens if t is not None})
            if any(t is None for t in tokens):
                cats.append(None)
            counts = np.array(
                [sum(1 for t in tokens if t == c) for c in cats], dtype=np.float64
            )
            counts += params.category_smoothing
            cum = np.cumsum(counts / counts.sum())
            marginals[col.name] = _DiscreteMarginal(tuple(cats), cum, col.kind == "binary")
    chol = _latent_correlation(train, params.correlation_shrinkage)
    return CopulaModel(schema=train.schema, marginals=marginals, chol=chol, params=params)


def sample_copula(model: CopulaModel, n: int, seed: int = 0) -> Dataset:
    """Draw n schema-conforming rows; bit-reproducible for a given (model, n, seed)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    m = len(model.schema)
    z = rng.standard_normal((n, m)) @ model.chol.T
    u = ndtr(z)
    columns: dict[str, np.ndarray] = {}
    for j, col in enumerate(model.schema):
        marg = model.marginals[col.name]
        if isinstance(marg, _NumericMarginal):
            vals = np.interp(u[:, j], marg.q_probs, marg.q_vals)
            if model.params.jitter > 0 and marg.span > 0:
                vals = vals + model.params.jitter * marg.span * rng.standard_normal(n)
            if marg.missing_rate > 0:
                miss = rng.random(n) < marg.missing_rate
                vals = np.where(miss, np.nan, vals)
            if marg.integer:
                vals = np.where(np.isnan(vals), np.nan, np.round(vals))
            columns[col.name] = vals
        else:
            idx = np.searchsorted(marg.cum_probs, u[:, j], side="right")
            idx = np.clip(idx, 0, len(marg.categories) - 1)
            cats = marg.categories
            if marg.binary:
                out = np.array(
                    [np.nan if cats[i] is None else float(cats[i]) for i in idx]
                )
            else:
                out = np.empty(n, dtype=object)
                for row, i in enumerate(idx):
                    out[row] = cats[i]
            columns[col.name] = out
    return Dataset(model.schema, columns)


def clamp_postprocess(syn: Dataset, real: Dataset) -> Dataset:
    """Clip numeric values into the real per-column range and map unseen
    categories to the real modal category. Idempotent."""
    out = syn
    for col in real.schema:
        real_vals = real.column(col.name)
        if col.kind == "categorical":
            observed = [v for v in real_vals if v is not None]
            if not observed:
                continue
            support = set(observed)
            counts: dict[str, int] = {}
            for v in observed:
                counts[v] = counts.get(v, 0) + 1
            mode = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
            syn_vals = out.column(col.name)
            mapped = np.array(
                [v if (v is None or v in support) else mode for v in syn_vals], dtype=object
            )
            out = out.replace_column(col.name, mapped)
        else:
            ok = real_vals[~np.isnan(real_vals.astype(np.float64))]
            if len(ok) == 0:
                continue
            lo, hi = float(np.min(ok)), float(np.max(ok))
            clipped = np.clip(out.column(col.name).astype(np.float64), lo, hi)
            clipped = np.where(np.isnan(out.column(col.name).astype(np.float64)), np.nan, clipped)
            out = out.replace_column(col.name, clipped)
    return out


# search-space document for tuning the builtin copula (see the hpo module)
DEFAULT_COPULA_SPACE = {
    "params": [
        {
            "name": "correlation_shrinkage",
            "domain": {"categorical": [0.0, 0.05, 0.1, 0.2, 0.4, 0.8]},
        },
        {"name": "jitter", "domain": {"loguniform": [1e-3, 0.5]}},
        {"name": "marginal_bins", "domain": {"choice": [4, 8, 16, 32, 64]}},
        {"name": "category_smoothing", "domain": {"loguniform": [1e-2, 10.0]}},
    ]
}


# ---------------------------------------------------------------------------
# External generator protocol

PROTOCOL_REQUEST_KEYS = (
    "command",
    "train_csv",
    "schema_json",
    "hyperparameters",
    "n_samples",
    "train_seed",
    "sample_seed",
    "out_csv",
)


def external_fit_sample(
    cmd: list[str],
    schema: tuple[ColumnSchema, ...],
    train: Dataset,
    hyperparameters: dict,
    n_samples: int,
    train_seed: int,
    sample_seed: int,
    timeout: float = 3600.0,
    missing_token: str = "",
    workdir: str | None = None,
) -> Dataset:
    """Run one fit_sample round trip against an external generator process.

    The request goes to the child's stdin as one JSON line; the response is
    the last JSON line of its stdout. Bulk data moves through CSV files.
    Every failure mode raises a GeneratorFailure subtype.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        train_csv = os.path.join(tmp, "train.csv")
        schema_json = os.path.join(tmp, "schema.json")
        out_csv = os.path.join(tmp, "out.csv")
        write_csv(train, train_csv, missing_token)
        dump_file(schema_to_document(schema), schema_json)
        request = {
            "command": "fit_sample",
            "train_csv": train_csv,
            "schema_json": schema_json,
            "hyperparameters": hyperparameters,
            "n_samples": n_samples,
            "train_seed": train_seed,
            "sample_seed": sample_seed,
            "out_csv": out_csv,
        }
        try:
            proc = subprocess.run(
                cmd,
                input=json.dumps(request) + "\n",
                capture_output=True,
                text=True,
                timeout=timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise GeneratorTimeout(f"generator exceeded {timeout}s") from exc
        except OSError as exc:
            raise GeneratorFailure(f"cannot run generator {cmd!r}: {exc}") from exc
        response = _parse_response(proc.stdout)
        if proc.returncode != 0 or response.get("status") != "ok":
            message = response.get("message", proc.stderr.strip()[-500:])
            raise GeneratorFailure(f"generator reported failure: {message}")
        produced = response.get("out_csv", out_csv)
        if not os.path.exists(produced):
            raise InvalidOutput(f"generator claimed ok but {produced} does not exist")
        try:
            ds = load_csv(produced, schema, missing_token)
        except DataError as exc:
            raise InvalidOutput(f"generator output does not conform: {exc}") from exc
        if ds.n_rows != n_samples:
            raise InvalidOutput(f"expected {n_samples} rows, got {ds.n_rows}")
        return ds


def _parse_response(stdout: str) -> dict:
    lines = [ln for ln in stdout.strip().splitlines() if ln.strip()]
    if not lines:
        raise GeneratorFailure("generator produced no response on stdout")
    try:
        response = json.loads(lines[-1])
    except json.JSONDecodeError as exc:
        raise GeneratorFailure(f"malformed generator response: {lines[-1]!r}") from exc
    if not isinstance(response, dict) or "status" not in response:
        raise GeneratorFailure(f"malformed generator response: {response!r}")
    return response


# ---------------------------------------------------------------------------
# Unified handle used by the HPO loop and the harness


@dataclass
class GeneratorHandle:
    """Pluggable generator: builtin copula or an external command.

    fit_sample fits on the (already preprocessed) training data and returns
    n rows. The builtin path clamps its output into the training ranges;
    external output is taken as-is unless clamp=True.
    """

    kind: str  # "builtin_copula" or "external"
    command: list[str] = field(default_factory=list)
    timeout: float = 3600.0
    clamp: bool | None = None
    base_params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ("builtin_copula", "external"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.kind == "external" and not self.command:
            raise ValueError("external generator needs a command")

    @classmethod
    def parse(cls, text: str, timeout: float = 3600.0) -> "GeneratorHandle":
        """Parse a CLI generator reference: 'builtin:copula' or 'exec:<command line>'."""
        if text == "builtin:copula":
            return cls(kind="builtin_copula")
        if text.startswith("exec:"):
            import shlex

            return cls(kind="external", command=shlex.split(text[5:]), timeout=timeout)
        raise ValueError(f"unknown generator reference {text!r}")

    def fit_sample(
        self,
        train: Dataset,
        params: dict,
        n: int,
        train_seed: int,
        sample_seed: int,
    ) -> Dataset:
        if self.kind == "builtin_copula":
            merged = dict(self.base_params)
            merged.update(params)
            try:
                copula_params = CopulaParams.from_mapping(merged)
            except ValueError as exc:
                raise GeneratorFailure(str(exc)) from exc
            model = fit_copula(train, copula_params, train_seed)
            syn = sample_copula(model, n, sample_seed)
            if self.clamp is None or self.clamp:
                syn = clamp_postprocess(syn, train)
            return syn
        syn = external_fit_sample(
            self.command,
            train.schema,
            train,
            params,
            n,
            train_seed,
            sample_seed,
            timeout=self.timeout,
        )
        if self.clamp:
            syn = clamp_postprocess(syn, train)
        return syn
