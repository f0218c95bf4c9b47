"""Adapter configuration: which model to wrap and how protocol hyperparameter
names map onto the wrapped library's constructor arguments.

Every protocol hyperparameter must match exactly one rule or the request is
rejected. Two rule shapes exist: scalar rules (typed, range- or
choice-validated, renamed to ``arg``) and one optional layer block that
expands layer_count/first/middle/last dimensions into explicit layer-size
tuples (non-increasing when the target is a compression stack, with the
decompression side emitted in reverse order).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


class AdapterError(Exception):
    """Any adapter-side failure; reported as status=error, exit 1."""


@dataclass(frozen=True)
class ScalarRule:
    arg: str
    kind: str = "float"  # float | int | str | bool
    low: float | None = None
    high: float | None = None
    choices: tuple | None = None

    def convert(self, name: str, value):
        try:
            if self.kind == "float":
                value = float(value)
            elif self.kind == "int":
                if isinstance(value, float) and value != int(value):
                    raise ValueError(value)
                value = int(value)
            elif self.kind == "bool":
                if not isinstance(value, bool):
                    raise ValueError(value)
            else:
                value = str(value)
        except (TypeError, ValueError):
            raise AdapterError(f"hyperparameter {name!r}: cannot read {value!r} as {self.kind}")
        if self.low is not None and value < self.low:
            raise AdapterError(f"hyperparameter {name!r}={value} below {self.low}")
        if self.high is not None and value > self.high:
            raise AdapterError(f"hyperparameter {name!r}={value} above {self.high}")
        if self.choices is not None and value not in self.choices:
            raise AdapterError(f"hyperparameter {name!r}={value} not in {list(self.choices)}")
        return value


@dataclass(frozen=True)
class LayerBlock:
    """Expands layer_count plus first/middle/last dims into size tuples."""

    count_name: str
    first_name: str
    middle_name: str
    last_name: str
    target: str  # constructor argument receiving the tuple
    reversed_target: str | None = None  # e.g. decompress_dims, the reverse order
    non_increasing: bool = False
    dims: tuple[int, ...] = (64, 128, 256, 512)
    counts: tuple[int, ...] = (1, 2, 3, 4)

    @property
    def names(self) -> tuple[str, ...]:
        return (self.count_name, self.first_name, self.middle_name, self.last_name)

    def expand(self, params: dict) -> dict:
        count = params.get(self.count_name)
        if count not in self.counts:
            raise AdapterError(f"{self.count_name}={count!r} not in {list(self.counts)}")
        sizes = {}
        for name in (self.first_name, self.middle_name, self.last_name):
            if name in params:
                v = params[name]
                if v not in self.dims:
                    raise AdapterError(f"{name}={v!r} not in {list(self.dims)}")
                sizes[name] = int(v)
        first = sizes.get(self.first_name)
        middle = sizes.get(self.middle_name, first)
        last = sizes.get(self.last_name, first)
        if first is None:
            raise AdapterError(f"layer block needs {self.first_name}")
        if count == 1:
            dims = (first,)
        elif count == 2:
            dims = (first, last)
        else:
            dims = (first,) + (middle,) * (count - 2) + (last,)
        if self.non_increasing and any(a < b for a, b in zip(dims, dims[1:])):
            raise AdapterError(
                f"layer dims {dims} must be non-increasing for a compression stack"
            )
        out = {self.target: dims}
        if self.reversed_target:
            out[self.reversed_target] = tuple(reversed(dims))
        return out


@dataclass(frozen=True)
class AdapterConfig:
    model: str
    scalars: dict[str, ScalarRule] = field(default_factory=dict)
    layer_block: LayerBlock | None = None
    model_options: dict = field(default_factory=dict)  # passed through to the model

    @classmethod
    def from_file(cls, path: str) -> "AdapterConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise AdapterError(f"cannot read config {path}: {exc}") from exc
        return cls.from_document(doc)

    @classmethod
    def from_document(cls, doc: dict) -> "AdapterConfig":
        if "model" not in doc:
            raise AdapterError("config needs a 'model' field")
        scalars = {}
        for name, spec in doc.get("hyperparameters", {}).items():
            scalars[name] = ScalarRule(
                arg=spec.get("arg", name),
                kind=spec.get("type", "float"),
                low=spec.get("low"),
                high=spec.get("high"),
                choices=tuple(spec["choices"]) if "choices" in spec else None,
            )
        block = None
        if "layer_block" in doc:
            b = doc["layer_block"]
            block = LayerBlock(
                count_name=b.get("count", "layer_count"),
                first_name=b.get("first", "first_layer_dim"),
                middle_name=b.get("middle", "middle_layer_dim"),
                last_name=b.get("last", "last_layer_dim"),
                target=b["target"],
                reversed_target=b.get("reversed_target"),
                non_increasing=bool(b.get("non_increasing", False)),
                dims=tuple(b.get("dims", (64, 128, 256, 512))),
                counts=tuple(b.get("counts", (1, 2, 3, 4))),
            )
        return cls(
            model=doc["model"],
            scalars=scalars,
            layer_block=block,
            model_options=doc.get("model_options", {}),
        )


def map_hyperparameters(params: dict, config: AdapterConfig) -> dict:
    """Translate protocol hyperparameters into constructor arguments.

    Unknown names and out-of-range values are rejected; layer-block names are
    consumed together and expanded into explicit dimension tuples.
    """
    out: dict = {}
    block_names = set(config.layer_block.names) if config.layer_block else set()
    seen_block = {}
    for name, value in params.items():
        if name in block_names:
            seen_block[name] = value
            continue
        rule = config.scalars.get(name)
        if rule is None:
            raise AdapterError(f"unknown hyperparameter {name!r}")
        if rule.arg in out:
            raise AdapterError(f"hyperparameter {name!r} maps to duplicate argument {rule.arg!r}")
        out[rule.arg] = rule.convert(name, value)
    if seen_block:
        out.update(config.layer_block.expand(seen_block))
    return out
