"""Deterministic JSON emission for reports.

Reports must be byte-identical across reruns with the same seeds, so floats
are rounded to 6 significant digits and key order is preserved as built.
"""

from __future__ import annotations

import json
import math
from typing import Any


def round_floats(obj: Any) -> Any:
    """Recursively normalize floats to 6 significant digits; NaN/inf become None."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    return obj


def dumps(obj: Any, indent: int | None = 2) -> str:
    return json.dumps(round_floats(obj), indent=indent, allow_nan=False)


def dump_file(obj: Any, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
        fh.write("\n")
