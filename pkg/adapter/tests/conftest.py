from __future__ import annotations

import csv
import json
import os
import random
import shutil

import pytest

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")

SCHEMA = {
    "columns": [
        {"name": "tx", "kind": "binary", "roles": ["outcome"], "missing_allowed": False},
        {"name": "group", "kind": "categorical", "roles": [], "missing_allowed": False},
        {"name": "age", "kind": "integer", "roles": [], "missing_allowed": False},
        {"name": "ostm", "kind": "integer", "roles": ["survival_time"], "missing_allowed": False},
        {"name": "efstm", "kind": "integer", "roles": ["survival_time"], "missing_allowed": False},
        {"name": "osstat", "kind": "binary", "roles": ["outcome", "survival_status"], "missing_allowed": False},
        {"name": "efsstat", "kind": "binary", "roles": ["outcome", "survival_status"], "missing_allowed": False},
        {"name": "score", "kind": "float", "roles": [], "missing_allowed": False},
    ],
    "survival": {"ostm": "ostm", "efstm": "efstm", "osstat": "osstat", "efsstat": "efsstat"},
}


def make_rows(n, seed):
    rng = random.Random(seed)
    rows = []
    for _ in range(n):
        ostm = rng.randint(5, 300)
        matched = rng.random() < 0.7
        efstm = ostm if matched else max(1, int(ostm * rng.uniform(0.3, 0.9)))
        osstat = rng.randint(0, 1)
        efsstat = osstat if matched else 1
        rows.append(
            [
                rng.randint(0, 1),
                rng.choice(["a", "b", "c"]),
                rng.randint(18, 80),
                ostm,
                efstm,
                osstat,
                efsstat,
                round(rng.uniform(40.0, 110.0), 1),
            ]
        )
    return rows


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("adapter_data")
    header = [c["name"] for c in SCHEMA["columns"]]
    with open(d / "train.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(make_rows(160, seed=1))
    with open(d / "test.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(make_rows(40, seed=2))
    with open(d / "schema.json", "w") as fh:
        json.dump(SCHEMA, fh, indent=2)
    for name in ("null.json", "tvae.json", "ctgan.json"):
        shutil.copy(os.path.join(CONFIG_DIR, name), d / name)
    return d
