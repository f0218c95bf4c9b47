"""Mixed-type row encoding shared by the propensity and k-means metrics.

One-hot for binary/categorical columns, z-score for integer/float columns.
All encoder statistics (categories, means, stds) come from the real dataset
only; synthetic rows are mapped through the frozen plan. Missing numeric
cells impute to the real column mean (z-score 0); missing discrete cells get
a dedicated category.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataspec import Dataset

MISSING_CATEGORY = "<missing>"


def _discrete_tokens(ds: Dataset, name: str) -> list[str]:
    """Column values as string tokens, missing mapped to the dedicated category."""
    col = ds.column(name)
    if ds.column_schema(name).kind == "categorical":
        return [MISSING_CATEGORY if v is None else str(v) for v in col]
    out = []
    for v in col:
        out.append(MISSING_CATEGORY if np.isnan(v) else str(int(v)))
    return out


@dataclass(frozen=True)
class _NumericEncoder:
    name: str
    mean: float
    std: float

    def transform(self, ds: Dataset) -> np.ndarray:
        x = ds.column(self.name).astype(np.float64)
        z = (np.where(np.isnan(x), self.mean, x) - self.mean) / self.std
        return z.reshape(-1, 1)

    @property
    def width(self) -> int:
        return 1


@dataclass(frozen=True)
class _OneHotEncoder:
    name: str
    categories: tuple[str, ...]

    def transform(self, ds: Dataset) -> np.ndarray:
        tokens = _discrete_tokens(ds, self.name)
        index = {c: i for i, c in enumerate(self.categories)}
        out = np.zeros((len(tokens), len(self.categories)))
        for row, tok in enumerate(tokens):
            col = index.get(tok)
            if col is not None:  # unseen categories encode as all zeros
                out[row, col] = 1.0
        return out

    @property
    def width(self) -> int:
        return len(self.categories)


@dataclass(frozen=True)
class EncodingPlan:
    encoders: tuple

    @classmethod
    def fit(cls, real: Dataset, columns: list[str] | None = None) -> "EncodingPlan":
        names = columns if columns is not None else [c.name for c in real.schema]
        encoders = []
        for name in names:
            kind = real.column_schema(name).kind
            if kind in ("integer", "float"):
                x = real.column(name).astype(np.float64)
                x = x[~np.isnan(x)]
                mean = float(np.mean(x)) if len(x) else 0.0
                std = float(np.std(x)) if len(x) else 0.0
                encoders.append(_NumericEncoder(name, mean, std if std > 0 else 1.0))
            else:
                cats = tuple(sorted(set(_discrete_tokens(real, name))))
                encoders.append(_OneHotEncoder(name, cats))
        return cls(tuple(encoders))

    @property
    def width(self) -> int:
        return sum(e.width for e in self.encoders)

    def transform(self, ds: Dataset) -> np.ndarray:
        if not self.encoders:
            return np.zeros((ds.n_rows, 0))
        return np.ascontiguousarray(np.hstack([e.transform(ds) for e in self.encoders]))
