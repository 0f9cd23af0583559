import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bricklayers.config import SCHEMA, ConfigError, ExperimentConfig
from bricklayers.dynamics import Kind

import jsonschema


def test_defaults_validate():
    cfg = ExperimentConfig()
    jsonschema.validate({k: v for k, v in cfg.to_dict().items() if v is not None}, SCHEMA)


@given(seed=st.integers(0, 2 ** 63), T=st.floats(0, 100), reps=st.integers(1, 50),
       theta=st.floats(-2, 2), left=st.integers(-10, 0), width=st.integers(1, 10))
def test_round_trip(seed, T, reps, theta, left, width):
    cfg = ExperimentConfig.from_dict({"seed": seed, "T": T, "replicas": reps,
                                      "process": {"kind": "boundary", "left": left, "right": left + width,
                                                  "theta": theta},
                                      "rate": {"family": "zero_range_exponential", "beta": 1.5}})
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


@pytest.mark.parametrize("bad", [{"T": -1}, {"rate": {"family": "nope"}}, {"process": {"kind": "monotone"}},
                                 {"unknown_key": 1}, {"replicas": 0}])
def test_rejects_invalid(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_override_ignores_none():
    cfg = ExperimentConfig().override(seed=5, output=None)
    assert cfg.seed == 5 and cfg.output == "out"


def test_builders():
    cfg = ExperimentConfig.from_dict({"process": {"kind": "monotone", "left": -2, "right": 2},
                                      "initial": {"type": "explicit", "values": [0, 1, -1, 0, 2, 0, 0]}})
    spec = cfg.process_spec()
    assert spec.kind is Kind.MONOTONE
    s = cfg.initial_state(spec, np.random.default_rng(0))
    assert s.window == (-3, 3) and s.w(1) == 2 and s.consistent()
    with pytest.raises(ConfigError):
        cfg.override(initial={"type": "explicit", "values": [0]}).initial_state(spec, np.random.default_rng(0))


def test_step_initial_is_sandwiched():
    cfg = ExperimentConfig.from_dict({"initial": {"type": "step", "theta1": -0.5, "theta2": 0.5},
                                      "window": [-10, 10]})
    s = cfg.initial_state(cfg.process_spec(), np.random.default_rng(1))
    assert s.window == (-10, 10)


def test_load_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(p)


@pytest.mark.parametrize("path", sorted((Path(__file__).parents[1] / "scripts" / "configs").glob("*.json")),
                         ids=lambda p: p.stem)
def test_bundled_configs_validate(path):
    cfg = ExperimentConfig.load(path)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
