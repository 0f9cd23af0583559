"""Experiment configuration: JSON files checked against a published schema."""
from __future__ import annotations

import copy
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .dynamics import LatticeState, ProcessSpec
from .equilibrium import GoodMeasureSpec, build_marginal, sample_marginal, sample_profile
from .rates import RateFunction, rate_from_config

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "bricklayers experiment",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "rate": {
            "type": "object",
            "required": ["family"],
            "properties": {
                "family": {"enum": ["exponential", "zero_range_exponential", "zero_range_linear_capped", "table"]},
                "beta": {"type": "number", "exclusiveMinimum": 0},
                "cap": {"type": "number", "exclusiveMinimum": 0},
                "beta_bound": {"type": "number", "exclusiveMinimum": 0},
                "regime": {"enum": ["bricklayers", "zero_range"]},
                "extrapolation": {"enum": ["constant", "linear", "geometric"]},
                "values": {"type": "array", "items": {"type": "array", "minItems": 2, "maxItems": 2}},
                "path": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "process": {
            "type": "object",
            "required": ["kind", "left", "right"],
            "properties": {
                "kind": {"enum": ["monotone", "boundary"]},
                "left": {"type": "integer"},
                "right": {"type": "integer"},
                "theta": {"type": "number"},
                "clamp": {"type": "integer", "minimum": 1},
                "boundary_rates": {"type": "array", "items": {"type": "number", "minimum": 0},
                                   "minItems": 2, "maxItems": 2},
            },
            "additionalProperties": False,
        },
        "initial": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["equilibrium", "flat", "step", "explicit"]},
                "theta": {"type": "number"},
                "theta1": {"type": "number"},
                "theta2": {"type": "number"},
                "values": {"type": "array", "items": {"type": "integer"}},
            },
            "additionalProperties": False,
        },
        "window": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        "T": {"type": "number", "minimum": 0},
        "snapshots": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "replicas": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "format": {"enum": ["jsonl", "csv"]},
        "workers": {"type": "integer", "minimum": 1},
        "max_events": {"type": "integer", "minimum": 1},
        "window_limit": {
            "type": ["object", "null"],
            "properties": {
                "target": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                "w": {"type": "integer", "minimum": 1},
                "k_max": {"type": "integer", "minimum": 0},
            },
            "required": ["target"],
            "additionalProperties": False,
        },
        "equilibrium": {
            "type": "object",
            "properties": {"theta": {"type": "number"}, "samples": {"type": "integer", "minimum": 0}},
            "additionalProperties": False,
        },
        "couple": {
            "type": ["object", "null"],
            "properties": {
                "members": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["label", "process"],
                        "properties": {
                            "label": {"type": "string"},
                            "process": {"$ref": "#/properties/process"},
                            "initial": {"$ref": "#/properties/initial"},
                            "perturb": {"type": "integer"},
                        },
                        "additionalProperties": False,
                    },
                },
                "pairs": {"type": "array", "items": {"type": "array", "items": {"type": "string"},
                                                      "minItems": 2, "maxItems": 2}},
            },
            "required": ["members"],
            "additionalProperties": False,
        },
        "suites": {"type": "object", "additionalProperties": {"type": "object"}},
    },
}


class ConfigError(ValueError):
    pass


def _defaults() -> dict:
    return {
        "rate": {"family": "exponential", "beta": 1.0},
        "process": {"kind": "boundary", "left": -3, "right": 3, "theta": 0.0},
        "initial": {"type": "equilibrium", "theta": 0.0},
        "window": None,
        "T": 1.0,
        "snapshots": [],
        "replicas": 1,
        "seed": 0,
        "output": "out",
        "format": "jsonl",
        "workers": os.cpu_count() or 1,
        "max_events": 10_000_000,
        "window_limit": None,
        "equilibrium": {"theta": 0.0, "samples": 10_000},
        "couple": None,
        "suites": {},
    }


@dataclass
class ExperimentConfig:
    rate: dict = field(default_factory=lambda: _defaults()["rate"])
    process: dict = field(default_factory=lambda: _defaults()["process"])
    initial: dict = field(default_factory=lambda: _defaults()["initial"])
    window: list | None = None
    T: float = 1.0
    snapshots: list = field(default_factory=list)
    replicas: int = 1
    seed: int = 0
    output: str = "out"
    format: str = "jsonl"
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    max_events: int = 10_000_000
    window_limit: dict | None = None
    equilibrium: dict = field(default_factory=lambda: _defaults()["equilibrium"])
    couple: dict | None = None
    suites: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = {k: v for k, v in d.items() if v is not None or k in ("window", "window_limit", "couple")}
        try:
            jsonschema.validate({k: v for k, v in d.items() if v is not None}, SCHEMA)
        except jsonschema.ValidationError as e:
            path = "/".join(str(p) for p in e.absolute_path)
            raise ConfigError(f"config invalid at '{path}': {e.message}") from None
        merged = _defaults()
        merged.update(copy.deepcopy(d))
        return cls(**merged)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: {e}") from None
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return copy.deepcopy(asdict(self))

    def override(self, **kw) -> "ExperimentConfig":
        d = self.to_dict()
        d.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig.from_dict(d)

    # builders

    def rate_function(self) -> RateFunction:
        return rate_from_config(self.rate)

    def process_spec(self, process: dict | None = None) -> ProcessSpec:
        p = dict(process or self.process)
        br = p.get("boundary_rates")
        return ProcessSpec(p["kind"], int(p["left"]), int(p["right"]), self.rate_function(),
                           theta=p.get("theta"), clamp=p.get("clamp"),
                           boundary_rates=tuple(br) if br is not None else None)

    def site_window(self, spec: ProcessSpec) -> tuple[int, int]:
        if self.window is not None:
            return int(self.window[0]), int(self.window[1])
        return spec.window

    def initial_state(self, spec: ProcessSpec, rng: np.random.Generator,
                      initial: dict | None = None) -> LatticeState:
        ini = initial or self.initial
        lo, hi = self.site_window(spec)
        n = hi - lo + 1
        kind = ini["type"]
        rate = self.rate_function()
        if kind == "flat":
            om = np.zeros(n, dtype=np.int64)
        elif kind == "explicit":
            om = np.asarray(ini["values"], dtype=np.int64)
            if len(om) != n:
                raise ConfigError(f"explicit initial state has {len(om)} values, window needs {n}")
        elif kind == "equilibrium":
            om = sample_marginal(build_marginal(rate, float(ini.get("theta", 0.0))), rng.random(n))
        elif kind == "step":
            gm = GoodMeasureSpec.step(rate, float(ini["theta1"]), float(ini["theta2"]))
            om = sample_profile(gm, (lo, hi), rng.random(n))
        else:  # pragma: no cover - schema forbids it
            raise ConfigError(kind)
        return LatticeState.from_omega(np.atleast_1d(om), lo)
