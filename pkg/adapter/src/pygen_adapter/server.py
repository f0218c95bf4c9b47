"""One-request server: read a fit_sample JSON line from stdin, do the work,
write one JSON response line to stdout. Exit 0 only on status=ok."""

from __future__ import annotations

import json
import os
import sys

from .config import AdapterConfig, AdapterError, map_hyperparameters
from .models import build_model

REQUIRED_KEYS = (
    "command",
    "train_csv",
    "schema_json",
    "hyperparameters",
    "n_samples",
    "train_seed",
    "sample_seed",
    "out_csv",
)


def handle_request(config: AdapterConfig, request: dict) -> dict:
    for key in REQUIRED_KEYS:
        if key not in request:
            raise AdapterError(f"request missing key {key!r}")
    if request["command"] != "fit_sample":
        raise AdapterError(f"unknown command {request['command']!r}")
    n = int(request["n_samples"])
    if n < 1:
        raise AdapterError("n_samples must be >= 1")
    for path_key in ("train_csv", "schema_json"):
        if not os.path.exists(request[path_key]):
            raise AdapterError(f"{path_key} does not exist: {request[path_key]}")
    args = map_hyperparameters(request["hyperparameters"], config)
    model = build_model(config.model, args, config.model_options)
    model.fit_sample(
        request["train_csv"],
        request["schema_json"],
        n,
        int(request["train_seed"]),
        int(request["sample_seed"]),
        request["out_csv"],
    )
    if not os.path.exists(request["out_csv"]):
        raise AdapterError("model produced no output file")
    return {"status": "ok", "out_csv": request["out_csv"]}


def serve(config: AdapterConfig, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    line = stdin.readline()
    try:
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AdapterError(f"request is not valid JSON: {exc}") from exc
        response = handle_request(config, request)
    except AdapterError as exc:
        print(json.dumps({"status": "error", "message": str(exc)}), file=stdout)
        return 1
    except Exception as exc:  # library failures also map to the error response
        print(json.dumps({"status": "error", "message": f"{type(exc).__name__}: {exc}"}), file=stdout)
        return 1
    print(json.dumps(response), file=stdout)
    return 0
