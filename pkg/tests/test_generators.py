from __future__ import annotations

import sys

import numpy as np
import pytest

from synthtrials import fixtures
from synthtrials.dataspec import ColumnSchema, Dataset
from synthtrials.generators import (
    CopulaParams,
    GeneratorFailure,
    GeneratorHandle,
    GeneratorTimeout,
    InvalidOutput,
    clamp_postprocess,
    external_fit_sample,
    fit_copula,
    sample_copula,
)
from synthtrials.metrics import pearson_corr


def corr_pair_ds(rho, n=2000, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    y = rho * x + np.sqrt(1 - rho * rho) * rng.normal(size=n)
    schema = (ColumnSchema("x", "float"), ColumnSchema("y", "float"))
    return Dataset(schema, {"x": x, "y": y})


# ---------------------------------------------------------------------------
# copula


def test_full_shrinkage_gives_identity_latent():
    ds = corr_pair_ds(0.9, n=400)
    model = fit_copula(ds, CopulaParams(correlation_shrinkage=1.0), seed=0)
    np.testing.assert_allclose(model.chol, np.eye(2), atol=1e-9)


def test_single_column_model():
    ds = Dataset((ColumnSchema("x", "float"),), {"x": np.arange(50.0)})
    model = fit_copula(ds, CopulaParams(jitter=0.0), seed=0)
    syn = sample_copula(model, 20, seed=1)
    assert syn.n_rows == 20


def test_latent_correlation_tracks_empirical():
    ds = corr_pair_ds(0.9, n=2000, seed=2)
    model = fit_copula(ds, CopulaParams(correlation_shrinkage=0.0), seed=0)
    latent = model.chol @ model.chol.T
    empirical = pearson_corr(ds.column("x"), ds.column("y"))
    assert abs(latent[0, 1] - empirical) <= 0.05


def test_sampled_correlation_tracks_target():
    ds = corr_pair_ds(0.9, n=2000, seed=3)
    model = fit_copula(
        ds, CopulaParams(correlation_shrinkage=0.0, jitter=0.0, marginal_bins=32), seed=0
    )
    syn = sample_copula(model, 2000, seed=4)
    got = pearson_corr(syn.column("x"), syn.column("y"))
    assert abs(got - 0.9) <= 0.1


def test_sampling_deterministic(small_actg):
    model = fit_copula(small_actg, CopulaParams(), seed=5)
    a = sample_copula(model, 300, seed=6)
    b = sample_copula(model, 300, seed=6)
    for col in small_actg.schema:
        if col.kind == "categorical":
            assert list(a.column(col.name)) == list(b.column(col.name))
        else:
            np.testing.assert_array_equal(a.column(col.name), b.column(col.name))


def test_marginal_frequencies_converge(small_actg):
    model = fit_copula(small_actg, CopulaParams(category_smoothing=0.0, jitter=0.0), seed=7)
    syn = sample_copula(model, 5000, seed=8)
    for name in ("raceth", "karnof", "txgrp"):
        train_tokens = list(small_actg.column(name))
        syn_tokens = list(syn.column(name))
        for cat in set(train_tokens):
            p = train_tokens.count(cat) / len(train_tokens)
            q = syn_tokens.count(cat) / len(syn_tokens)
            se = np.sqrt(p * (1 - p) / 5000)
            assert abs(q - p) <= max(3 * se, 0.01)


def test_schema_conformance_kinds(small_actg):
    model = fit_copula(small_actg, CopulaParams(jitter=0.3), seed=9)
    syn = sample_copula(model, 200, seed=10)
    for col in small_actg.schema:
        vals = syn.column(col.name)
        if col.kind == "integer":
            assert np.all(vals == np.round(vals))
        elif col.kind == "binary":
            assert set(np.unique(vals)) <= {0.0, 1.0}


def test_missing_mass_reproduced():
    rng = np.random.default_rng(11)
    vals = rng.normal(size=400)
    vals[rng.random(400) < 0.3] = np.nan
    ds = Dataset(
        (ColumnSchema("x", "float", missing_allowed=True),), {"x": vals}
    )
    model = fit_copula(ds, CopulaParams(jitter=0.0), seed=12)
    syn = sample_copula(model, 4000, seed=13)
    rate = float(np.mean(np.isnan(syn.column("x"))))
    assert abs(rate - float(np.mean(np.isnan(vals)))) <= 0.03


def test_empty_training_rejected():
    ds = Dataset((ColumnSchema("x", "float"),), {"x": np.array([])})
    with pytest.raises(ValueError, match="empty"):
        fit_copula(ds, CopulaParams(), seed=0)


def test_params_validation():
    with pytest.raises(ValueError):
        CopulaParams(correlation_shrinkage=1.5)
    with pytest.raises(ValueError):
        CopulaParams(marginal_bins=1)
    with pytest.raises(ValueError, match="unknown"):
        CopulaParams.from_mapping({"lr": 0.1})


# ---------------------------------------------------------------------------
# clamping


def test_clamp_numeric_and_categorical():
    schema = (ColumnSchema("x", "float"), ColumnSchema("c", "categorical"))
    real = Dataset(
        schema,
        {"x": np.array([0.0, 50.0, 100.0]), "c": np.array(["A", "A", "B"], dtype=object)},
    )
    syn = Dataset(
        schema,
        {"x": np.array([200.0, -10.0, 60.0]), "c": np.array(["Z", "B", "A"], dtype=object)},
    )
    out = clamp_postprocess(syn, real)
    np.testing.assert_array_equal(out.column("x"), [100.0, 0.0, 60.0])
    assert list(out.column("c")) == ["A", "B", "A"]  # unseen Z maps to the mode
    again = clamp_postprocess(out, real)
    np.testing.assert_array_equal(again.column("x"), out.column("x"))
    assert list(again.column("c")) == list(out.column("c"))


def test_clamp_in_range_unchanged():
    schema = (ColumnSchema("x", "float"),)
    real = Dataset(schema, {"x": np.array([0.0, 10.0])})
    syn = Dataset(schema, {"x": np.array([3.0, 7.0])})
    np.testing.assert_array_equal(clamp_postprocess(syn, real).column("x"), [3.0, 7.0])


# ---------------------------------------------------------------------------
# external generator protocol

CONFORMING = """\
import csv, json, sys
req = json.loads(sys.stdin.readline())
with open(req["train_csv"]) as fh:
    rows = list(csv.reader(fh))
header, data = rows[0], rows[1:]
out = [data[i % len(data)] for i in range(req["n_samples"])]
with open(req["out_csv"], "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(header)
    w.writerows(out)
print(json.dumps({"status": "ok", "out_csv": req["out_csv"]}))
"""

NAN_EMITTER = """\
import csv, json, sys
req = json.loads(sys.stdin.readline())
with open(req["train_csv"]) as fh:
    rows = list(csv.reader(fh))
header, data = rows[0], rows[1:]
out = [list(data[i % len(data)]) for i in range(req["n_samples"])]
out[0][header.index("wtkg")] = "nan"
with open(req["out_csv"], "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(header)
    w.writerows(out)
print(json.dumps({"status": "ok", "out_csv": req["out_csv"]}))
"""

SHORT_OUTPUT = CONFORMING.replace('req["n_samples"]', '(req["n_samples"] - 1)')

SLEEPER = """\
import sys, time
sys.stdin.readline()
time.sleep(30)
"""

FAILER = """\
import json, sys
sys.stdin.readline()
print(json.dumps({"status": "error", "message": "did not converge"}))
sys.exit(1)
"""

GARBAGE = """\
import sys
sys.stdin.readline()
print("not json at all")
"""


def adapter_cmd(tmp_path, name, body):
    path = tmp_path / f"{name}.py"
    path.write_text(body)
    return [sys.executable, str(path)]


@pytest.fixture()
def train300():
    return fixtures.actg_like(n=300, seed=21)


def test_external_conforming(tmp_path, train300):
    cmd = adapter_cmd(tmp_path, "ok", CONFORMING)
    out = external_fit_sample(cmd, train300.schema, train300, {}, 40, 1, 2, timeout=60)
    assert out.n_rows == 40


def test_external_nan_cell_invalid(tmp_path, train300):
    cmd = adapter_cmd(tmp_path, "nan", NAN_EMITTER)
    with pytest.raises(InvalidOutput, match="conform"):
        external_fit_sample(cmd, train300.schema, train300, {}, 10, 1, 2, timeout=60)


def test_external_row_count_mismatch(tmp_path, train300):
    cmd = adapter_cmd(tmp_path, "short", SHORT_OUTPUT)
    with pytest.raises(InvalidOutput, match="rows"):
        external_fit_sample(cmd, train300.schema, train300, {}, 10, 1, 2, timeout=60)


def test_external_timeout(tmp_path, train300):
    cmd = adapter_cmd(tmp_path, "sleep", SLEEPER)
    with pytest.raises(GeneratorTimeout):
        external_fit_sample(cmd, train300.schema, train300, {}, 10, 1, 2, timeout=1.0)


def test_external_error_status(tmp_path, train300):
    cmd = adapter_cmd(tmp_path, "fail", FAILER)
    with pytest.raises(GeneratorFailure, match="did not converge"):
        external_fit_sample(cmd, train300.schema, train300, {}, 10, 1, 2, timeout=60)


def test_external_garbage_response(tmp_path, train300):
    cmd = adapter_cmd(tmp_path, "garbage", GARBAGE)
    with pytest.raises(GeneratorFailure, match="malformed"):
        external_fit_sample(cmd, train300.schema, train300, {}, 10, 1, 2, timeout=60)


def test_protocol_opacity(tmp_path, train300):
    """Two generators emitting identical CSVs yield identical datasets."""
    cmd = adapter_cmd(tmp_path, "ok2", CONFORMING)
    a = external_fit_sample(cmd, train300.schema, train300, {}, 25, 1, 2, timeout=60)
    b = external_fit_sample(cmd, train300.schema, train300, {"other": 1}, 25, 1, 2, timeout=60)
    for col in train300.schema:
        if col.kind == "categorical":
            assert list(a.column(col.name)) == list(b.column(col.name))
        else:
            np.testing.assert_array_equal(a.column(col.name), b.column(col.name))


def test_handle_parse():
    h = GeneratorHandle.parse("builtin:copula")
    assert h.kind == "builtin_copula"
    h = GeneratorHandle.parse("exec:python3 gen.py --flag")
    assert h.kind == "external" and h.command == ["python3", "gen.py", "--flag"]
    with pytest.raises(ValueError):
        GeneratorHandle.parse("magic:wand")


def test_handle_builtin_rejects_unknown_params(train300):
    h = GeneratorHandle(kind="builtin_copula")
    with pytest.raises(GeneratorFailure, match="unknown"):
        h.fit_sample(train300, {"nope": 1}, 10, 0, 0)
