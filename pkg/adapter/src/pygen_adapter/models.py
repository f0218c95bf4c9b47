"""Wrapped generators.

The null model is a dependency-free bootstrap resampler used for protocol
conformance testing. The tvae/ctgan entries translate hyperparameters for
the `ctgan` library's TVAE/CTGAN classes and import it lazily; when the
library is not installed the request fails cleanly with status=error.
"""

from __future__ import annotations

import csv
import random
import time

from .config import AdapterError


class NullModel:
    """Bootstrap-resamples the training CSV.

    ``fraction`` restricts resampling to a prefix of the training rows
    (a harmless knob that gives optimizers something to vary). The debug
    options exist for protocol conformance tests: ``debug_corrupt`` plants a
    bad cell in the output, ``debug_sleep`` stalls the process.
    """

    def __init__(self, args: dict, options: dict):
        self.fraction = float(args.get("fraction", 1.0))
        if not (0.0 < self.fraction <= 1.0):
            raise AdapterError(f"fraction must be in (0, 1], got {self.fraction}")
        self.corrupt = options.get("debug_corrupt")
        self.sleep = float(options.get("debug_sleep", 0.0))

    def fit_sample(self, train_csv, schema_json, n, train_seed, sample_seed, out_csv):
        if self.sleep > 0:
            time.sleep(self.sleep)
        with open(train_csv, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 2:
            raise AdapterError("training CSV has no data rows")
        header, data = rows[0], rows[1:]
        pool = data[: max(1, int(round(self.fraction * len(data))))]
        rng = random.Random(sample_seed)
        sampled = [pool[rng.randrange(len(pool))] for _ in range(n)]
        if self.corrupt == "nan" and sampled:
            sampled[0] = list(sampled[0])
            sampled[0][-1] = "nan"
        if self.corrupt == "short" and len(sampled) > 1:
            sampled = sampled[:-1]
        with open(out_csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(sampled)


class CtganLibraryModel:
    """TVAE/CTGAN via the `ctgan` package, resolved at request time."""

    def __init__(self, model: str, args: dict, options: dict):
        self.model = model
        self.args = args
        self.options = options

    def fit_sample(self, train_csv, schema_json, n, train_seed, sample_seed, out_csv):
        try:
            import ctgan  # noqa: F401
        except ImportError as exc:
            raise AdapterError(
                f"model {self.model!r} needs the 'ctgan' package, which is not installed"
            ) from exc
        import json

        import ctgan as lib
        import pandas as pd

        with open(schema_json, "r", encoding="utf-8") as fh:
            schema = json.load(fh)
        discrete = [
            c["name"] for c in schema["columns"] if c["kind"] in ("binary", "categorical")
        ]
        frame = pd.read_csv(train_csv)
        cls = lib.TVAE if self.model == "tvae" else lib.CTGAN
        model = cls(**self.args)
        # the library draws from torch's global RNG; seed both phases explicitly
        import torch

        torch.manual_seed(train_seed)
        model.fit(frame, discrete_columns=discrete)
        torch.manual_seed(sample_seed)
        model.sample(n).to_csv(out_csv, index=False)


def build_model(model: str, args: dict, options: dict):
    if model == "null":
        return NullModel(args, options)
    if model in ("tvae", "ctgan"):
        return CtganLibraryModel(model, args, options)
    raise AdapterError(f"unknown model {model!r}")
