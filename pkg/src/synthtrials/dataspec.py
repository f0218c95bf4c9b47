"""Typed tabular datasets with survival-column annotations.

Columns are stored columnar: binary/integer/float columns as float64 arrays
(NaN marks a missing cell), categorical columns as object arrays of string
tokens (None marks missing). Datasets are immutable; every operation returns
a new Dataset.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

KINDS = ("binary", "categorical", "integer", "float")
NUMERIC_KINDS = ("binary", "integer", "float")
ROLES = ("outcome", "survival_time", "survival_status")


class SchemaError(ValueError):
    """Malformed schema document or schema invariant violation."""


class DataError(ValueError):
    """Cell-level data problem: type mismatch, disallowed missing, shape mismatch."""


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    roles: frozenset[str] = field(default_factory=frozenset)
    missing_allowed: bool = False

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SchemaError(f"unknown column kind {self.kind!r} for {self.name!r}")
        bad = set(self.roles) - set(ROLES)
        if bad:
            raise SchemaError(f"unknown roles {sorted(bad)} for column {self.name!r}")

    @property
    def is_numeric(self) -> bool:
        return self.kind in NUMERIC_KINDS


@dataclass(frozen=True)
class SurvivalColumns:
    ostm: str
    efstm: str
    osstat: str
    efsstat: str
    efstm_dif: str = ""

    def __post_init__(self) -> None:
        if not self.efstm_dif:
            object.__setattr__(self, "efstm_dif", self.efstm + "_dif")


def parse_schema(text: str) -> list[ColumnSchema]:
    """Parse the ``columns`` part of a schema document (JSON) into ColumnSchema entries."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "columns" not in doc:
        raise SchemaError("schema document must be an object with a 'columns' list")
    cols: list[ColumnSchema] = []
    seen: set[str] = set()
    for entry in doc["columns"]:
        if not isinstance(entry, dict) or "name" not in entry or "kind" not in entry:
            raise SchemaError(f"malformed column entry: {entry!r}")
        name = str(entry["name"])
        if name in seen:
            raise SchemaError(f"duplicate column name {name!r}")
        seen.add(name)
        roles = frozenset(r for r in entry.get("roles", []) if r != "none")
        cols.append(
            ColumnSchema(
                name=name,
                kind=str(entry["kind"]),
                roles=roles,
                missing_allowed=bool(entry.get("missing_allowed", False)),
            )
        )
    return cols


def parse_schema_document(text: str) -> tuple[list[ColumnSchema], SurvivalColumns | None]:
    """Parse a full schema document: column list plus optional survival block."""
    cols = parse_schema(text)
    doc = json.loads(text)
    sc = None
    if "survival" in doc and doc["survival"]:
        s = doc["survival"]
        try:
            sc = SurvivalColumns(
                ostm=s["ostm"],
                efstm=s["efstm"],
                osstat=s["osstat"],
                efsstat=s["efsstat"],
                efstm_dif=s.get("efstm_dif", ""),
            )
        except KeyError as exc:
            raise SchemaError(f"survival block missing key {exc}") from exc
        validate_survival(cols, sc)
    return cols, sc


def validate_survival(schema: Sequence[ColumnSchema], sc: SurvivalColumns) -> None:
    by_name = {c.name: c for c in schema}
    for name in (sc.ostm, sc.efstm, sc.osstat, sc.efsstat):
        if name not in by_name:
            raise SchemaError(f"survival column {name!r} not in schema")
    for name in (sc.ostm, sc.efstm):
        if by_name[name].kind not in ("integer", "float"):
            raise SchemaError(f"survival time column {name!r} must be integer or float")
    for name in (sc.osstat, sc.efsstat):
        if by_name[name].kind != "binary":
            raise SchemaError(f"survival status column {name!r} must be binary")


@dataclass(frozen=True)
class Dataset:
    schema: tuple[ColumnSchema, ...]
    columns: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        names = [c.name for c in self.schema]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        if set(self.columns) != set(names):
            raise DataError("column data does not match schema names")
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise DataError(f"ragged columns: lengths {sorted(lengths)}")

    @property
    def n_rows(self) -> int:
        if not self.schema:
            return 0
        return len(self.columns[self.schema[0].name])

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(f"no column {name!r}")
        return self.columns[name]

    def column_schema(self, name: str) -> ColumnSchema:
        for c in self.schema:
            if c.name == name:
                return c
        raise KeyError(f"no column {name!r}")

    def numeric_names(self) -> list[str]:
        """Columns treated as numeric by the metrics: integer and float kinds."""
        return [c.name for c in self.schema if c.kind in ("integer", "float")]

    def discrete_names(self) -> list[str]:
        """Columns treated as categorical by the metrics: binary and categorical kinds."""
        return [c.name for c in self.schema if c.kind in ("binary", "categorical")]

    def take(self, indices: Iterable[int]) -> Dataset:
        idx = np.asarray(list(indices), dtype=np.intp)
        return Dataset(self.schema, {n: v[idx] for n, v in self.columns.items()})

    def mask(self, keep: np.ndarray) -> Dataset:
        keep = np.asarray(keep, dtype=bool)
        if len(keep) != self.n_rows:
            raise DataError("mask length does not match row count")
        return Dataset(self.schema, {n: v[keep] for n, v in self.columns.items()})

    def replace_column(
        self,
        name: str,
        values: np.ndarray,
        *,
        new_name: str | None = None,
        new_kind: str | None = None,
    ) -> Dataset:
        """Swap one column's values in place, optionally renaming or re-kinding it."""
        old = self.column_schema(name)
        col = replace(
            old,
            name=new_name if new_name is not None else old.name,
            kind=new_kind if new_kind is not None else old.kind,
        )
        schema = tuple(col if c.name == name else c for c in self.schema)
        columns = dict(self.columns)
        del columns[name]
        columns[col.name] = np.asarray(values)
        return Dataset(schema, columns)

    def missing_mask(self, name: str) -> np.ndarray:
        col = self.column(name)
        if self.column_schema(name).kind == "categorical":
            return np.array([v is None for v in col], dtype=bool)
        return np.isnan(col.astype(np.float64))


# ---------------------------------------------------------------------------
# CSV ingestion / emission


def _parse_numeric(token: str, kind: str) -> float:
    try:
        value = float(token)
    except ValueError as exc:
        raise ValueError(f"not a number: {token!r}") from exc
    if not math.isfinite(value):
        raise ValueError(f"non-finite value: {token!r}")
    if kind == "binary" and value not in (0.0, 1.0):
        raise ValueError(f"binary cell must be 0 or 1, got {token!r}")
    if kind == "integer" and value != int(value):
        raise ValueError(f"integer cell has fractional part: {token!r}")
    return value


def load_csv(path: str, schema: Sequence[ColumnSchema], missing_token: str = "") -> Dataset:
    """Load a UTF-8 CSV with header against a schema; cells parse to their declared kind."""
    schema = tuple(schema)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        names = [c.name for c in schema]
        if sorted(header) != sorted(names):
            raise DataError(
                f"{path}: header does not match schema columns "
                f"(header={header}, schema={names})"
            )
        order = [header.index(n) for n in names]
        raw: list[list[str]] = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{row_no}: expected {len(header)} cells, got {len(row)}")
            raw.append([row[i] for i in order])

    columns: dict[str, np.ndarray] = {}
    for j, col in enumerate(schema):
        if col.kind == "categorical":
            out_obj = np.empty(len(raw), dtype=object)
            for i, row in enumerate(raw):
                token = row[j]
                if token == missing_token:
                    if not col.missing_allowed:
                        raise DataError(
                            f"{path}: missing value at row {i + 2}, column {col.name!r} "
                            "(missing not allowed)"
                        )
                    out_obj[i] = None
                else:
                    out_obj[i] = token
            columns[col.name] = out_obj
        else:
            out = np.empty(len(raw), dtype=np.float64)
            for i, row in enumerate(raw):
                token = row[j]
                if token == missing_token:
                    if not col.missing_allowed:
                        raise DataError(
                            f"{path}: missing value at row {i + 2}, column {col.name!r} "
                            "(missing not allowed)"
                        )
                    out[i] = np.nan
                else:
                    try:
                        out[i] = _parse_numeric(token, col.kind)
                    except ValueError as exc:
                        raise DataError(
                            f"{path}: row {i + 2}, column {col.name!r}: {exc}"
                        ) from exc
            columns[col.name] = out
    return Dataset(schema, columns)


def _format_cell(value, kind: str, missing_token: str) -> str:
    if kind == "categorical":
        return missing_token if value is None else str(value)
    if np.isnan(value):
        return missing_token
    if kind in ("binary", "integer"):
        return str(int(value))
    return repr(float(value))


def write_csv(ds: Dataset, path: str, missing_token: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in ds.schema])
        cols = [ds.columns[c.name] for c in ds.schema]
        kinds = [c.kind for c in ds.schema]
        for i in range(ds.n_rows):
            writer.writerow(
                [_format_cell(col[i], kind, missing_token) for col, kind in zip(cols, kinds)]
            )


def schema_to_document(schema: Sequence[ColumnSchema], sc: SurvivalColumns | None = None) -> dict:
    doc: dict = {
        "columns": [
            {
                "name": c.name,
                "kind": c.kind,
                "roles": sorted(c.roles),
                "missing_allowed": c.missing_allowed,
            }
            for c in schema
        ]
    }
    if sc is not None:
        doc["survival"] = {
            "ostm": sc.ostm,
            "efstm": sc.efstm,
            "osstat": sc.osstat,
            "efsstat": sc.efsstat,
            "efstm_dif": sc.efstm_dif,
        }
    return doc


# ---------------------------------------------------------------------------
# Dataset-level preprocessing


_RECODE_TOKENS = {"-1", "0", "1"}


def recode_missing_binary(ds: Dataset, cols: Sequence[str]) -> Dataset:
    """Recode binary-with-missing columns to categorical {-1, 0, 1}, -1 for missing.

    Idempotent: columns already recoded (categorical with support in {-1,0,1})
    pass through unchanged.
    """
    out = ds
    for name in cols:
        col = out.column_schema(name)
        values = out.column(name)
        if col.kind == "categorical":
            support = {v for v in values if v is not None}
            if support <= _RECODE_TOKENS and not any(v is None for v in values):
                continue
            raise DataError(f"column {name!r} is categorical but not in recoded form")
        if col.kind != "binary":
            raise DataError(f"column {name!r} has kind {col.kind}, expected binary")
        tokens = np.empty(len(values), dtype=object)
        for i, v in enumerate(values):
            tokens[i] = "-1" if np.isnan(v) else str(int(v))
        out = out.replace_column(name, tokens, new_kind="categorical")
    return out


def outcome_columns(schema: Sequence[ColumnSchema]) -> list[str]:
    """Binary outcome columns, the stratification key for splits and folds."""
    return [c.name for c in schema if c.kind == "binary" and "outcome" in c.roles]


@dataclass(frozen=True)
class SplitResult:
    train: Dataset
    test: Dataset
    strata_key: tuple[str, ...]


def _strata_groups(ds: Dataset, key_cols: Sequence[str]) -> dict[tuple, list[int]]:
    for name in key_cols:
        ds.column_schema(name)  # raises KeyError if absent
    groups: dict[tuple, list[int]] = {}
    kinds = {n: ds.column_schema(n).kind for n in key_cols}
    for i in range(ds.n_rows):
        parts = []
        for n in key_cols:
            v = ds.columns[n][i]
            if kinds[n] == "categorical":
                parts.append("<missing>" if v is None else str(v))
            else:
                parts.append("<missing>" if np.isnan(v) else repr(float(v)))
        groups.setdefault(tuple(parts), []).append(i)
    if not groups:
        groups[()] = []
    return groups


def stratified_split(
    ds: Dataset,
    test_fraction: float,
    seed: int,
    strata_cols: Sequence[str] | None = None,
) -> SplitResult:
    """Split rows into train/test, stratified by the binary outcome combination.

    Per stratum the test share is round-half-up(stratum_size * test_fraction);
    strata with fewer than 2 rows go entirely to train. Row order within each
    side follows the source order.
    """
    if not (0.0 < test_fraction < 1.0):
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    key = tuple(strata_cols) if strata_cols is not None else tuple(outcome_columns(ds.schema))
    groups = _strata_groups(ds, key) if ds.n_rows else {(): []}
    rng = np.random.default_rng(seed)
    test_idx: list[int] = []
    for key_val in sorted(groups):
        rows = groups[key_val]
        if len(rows) < 2:
            continue
        n_test = int(math.floor(len(rows) * test_fraction + 0.5))
        n_test = min(n_test, len(rows))
        perm = rng.permutation(len(rows))
        test_idx.extend(rows[p] for p in perm[:n_test])
    test_set = set(test_idx)
    train_rows = [i for i in range(ds.n_rows) if i not in test_set]
    test_rows = sorted(test_set)
    return SplitResult(train=ds.take(train_rows), test=ds.take(test_rows), strata_key=key)


def kfold(
    ds: Dataset,
    k: int,
    seed: int,
    strata_cols: Sequence[str] | None = None,
) -> list[tuple[Dataset, Dataset]]:
    """Stratified k-fold partition; returns (train, holdout) pairs.

    Global holdout sizes are n//k plus one extra row for the first n%k folds.
    Within each stratum rows are shuffled (seeded) and dealt greedily to the
    folds with the most remaining capacity, ties to the lowest fold index.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    n = ds.n_rows
    if k > n:
        raise ValueError(f"k={k} exceeds row count {n}")
    key = tuple(strata_cols) if strata_cols is not None else tuple(outcome_columns(ds.schema))
    groups = _strata_groups(ds, key)
    capacity = np.array([n // k + (1 if i < n % k else 0) for i in range(k)], dtype=np.int64)
    fold_rows: list[list[int]] = [[] for _ in range(k)]
    rng = np.random.default_rng(seed)
    for key_val in sorted(groups):
        rows = groups[key_val]
        perm = rng.permutation(len(rows))
        shuffled = [rows[p] for p in perm]
        base, extra = divmod(len(rows), k)
        counts = [base] * k
        # one leftover row each to the folds with the largest remaining capacity
        spare = capacity - base
        order = sorted(range(k), key=lambda i: (-spare[i], i))
        for i in order[:extra]:
            counts[i] += 1
        pos = 0
        for i in range(k):
            fold_rows[i].extend(shuffled[pos : pos + counts[i]])
            capacity[i] -= counts[i]
            pos += counts[i]
    folds = []
    for i in range(k):
        hold = set(fold_rows[i])
        train_rows = [r for r in range(n) if r not in hold]
        folds.append((ds.take(train_rows), ds.take(sorted(hold))))
    return folds


# ---------------------------------------------------------------------------
# EFSTM difference transform


def _time_kind(ds: Dataset, sc: SurvivalColumns) -> str:
    a = ds.column_schema(sc.ostm).kind
    b = ds.column_schema(sc.efstm if sc.efstm in ds.columns else sc.efstm_dif).kind
    return "integer" if a == "integer" and b == "integer" else "float"


def apply_efstm_transform(ds: Dataset, sc: SurvivalColumns) -> Dataset:
    """Replace the EFSTM column by the difference OSTM - EFSTM."""
    for name in (sc.ostm, sc.efstm):
        if name not in ds.columns:
            raise DataError(f"survival column {name!r} not present")
    dif = ds.column(sc.ostm) - ds.column(sc.efstm)
    return ds.replace_column(
        sc.efstm, dif, new_name=sc.efstm_dif, new_kind=_time_kind(ds, sc)
    )


def invert_efstm_transform(ds: Dataset, sc: SurvivalColumns) -> Dataset:
    """Reconstruct EFSTM = OSTM - EFSTM_dif and drop the difference column."""
    if sc.efstm_dif not in ds.columns:
        raise DataError(f"difference column {sc.efstm_dif!r} not present")
    if sc.ostm not in ds.columns:
        raise DataError(f"survival column {sc.ostm!r} not present")
    efstm = ds.column(sc.ostm) - ds.column(sc.efstm_dif)
    return ds.replace_column(
        sc.efstm_dif, efstm, new_name=sc.efstm, new_kind=_time_kind(ds, sc)
    )
