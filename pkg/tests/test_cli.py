import json
import math
import shutil

import numpy as np
import pytest

from bricklayers.cli import main, replica_seed
from bricklayers.clocks import derive_seed
from bricklayers.config import ExperimentConfig
from bricklayers.equilibrium import build_marginal, mean_density, variance
from bricklayers.io import load_snapshots, read_jsonl
from bricklayers.rates import ExponentialBricklayers

SIM = {"process": {"kind": "boundary", "left": -3, "right": 3, "theta": 0.0},
       "initial": {"type": "equilibrium", "theta": 0.0}, "T": 2.0, "snapshots": [0.5, 1.0],
       "replicas": 3, "seed": 7, "workers": 1, "format": "csv"}
COUPLE = {"process": {"kind": "monotone", "left": -4, "right": 4}, "initial": {"type": "flat"}, "T": 2.0,
          "replicas": 2, "seed": 3, "workers": 1,
          "couple": {"members": [{"label": "a", "process": {"kind": "monotone", "left": -4, "right": 4}},
                                 {"label": "b", "process": {"kind": "monotone", "left": -4, "right": 4},
                                  "perturb": 0}],
                     "pairs": [["a", "b"]]}}


def _write(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _tree(d):
    return {str(p.relative_to(d)): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


@pytest.mark.parametrize("cmd,cfg", [("simulate", SIM), ("couple", COUPLE)])
def test_byte_identical_reruns(tmp_path, monkeypatch, cmd, cfg):
    monkeypatch.chdir(tmp_path)
    conf = _write(tmp_path, "c.json", cfg)
    assert main([cmd, "--config", conf, "--out", "run"]) == 0
    first = _tree(tmp_path / "run")
    shutil.rmtree(tmp_path / "run")
    assert main([cmd, "--config", conf, "--out", "run"]) == 0
    assert _tree(tmp_path / "run") == first


def test_worker_count_changes_only_the_recorded_setting(tmp_path):
    conf = _write(tmp_path, "c.json", SIM)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["simulate", "--config", conf, "--out", str(a), "--workers", "1"])
    main(["simulate", "--config", conf, "--out", str(b), "--workers", "3"])
    for f in sorted(a.glob("replica_*.jsonl")):
        ra, rb = read_jsonl(f), read_jsonl(b / f.name)
        assert ra[1:] == rb[1:]
        ha, hb = ra[0], rb[0]
        for h in (ha, hb):
            del h["config"]["workers"], h["config"]["output"]
        assert ha == hb


def test_replica_files_and_seeds(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--config", _write(tmp_path, "c.json", SIM), "--out", str(out),
                 "--replicas", "4", "--seed", "11"]) == 0
    files = sorted(out.glob("replica_*.jsonl"))
    assert len(files) == 4
    seeds = [read_jsonl(f)[0]["seed"] for f in files]
    assert seeds == [derive_seed(11, k) for k in range(4)] == [replica_seed(11, k) for k in range(4)]
    assert len(set(seeds)) == 4
    for f in files:
        for s in load_snapshots(f):
            assert s.consistent()
    run = json.loads((out / "run.json").read_text())
    assert ExperimentConfig.from_dict(run["config"]) == ExperimentConfig.from_dict(
        read_jsonl(files[0])[0]["config"])
    assert run["config"]["seed"] == 11


def test_embedded_config_round_trips(tmp_path):
    out = tmp_path / "o"
    main(["simulate", "--config", _write(tmp_path, "c.json", SIM), "--out", str(out)])
    header = read_jsonl(out / "replica_0000.jsonl")[0]
    cfg = ExperimentConfig.from_dict(header["config"])
    assert cfg.to_dict() == header["config"]


def test_couple_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["couple", "--config", _write(tmp_path, "c.json", COUPLE), "--out", str(out)]) == 0
    d = read_jsonl(out / "replica_0000" / "discrepancy.jsonl")
    assert d[0] == {"t": 0.0, "pair": ["a", "b"], "d": {"0": -1, "1": 1}}


def test_window_limit_exit_codes(tmp_path):
    base = {"process": {"kind": "monotone", "left": -200, "right": 200}, "initial": {"type": "flat"},
            "T": 1.0, "seed": 1, "workers": 1}
    ok = dict(base, window_limit={"target": [-2, 2]})
    assert main(["simulate", "--config", _write(tmp_path, "a.json", ok), "--out", str(tmp_path / "a")]) == 0
    short = dict(base, process={"kind": "monotone", "left": -6, "right": 6}, T=5.0,
                 window_limit={"target": [-2, 2], "w": 2, "k_max": 5})
    assert main(["simulate", "--config", _write(tmp_path, "b.json", short), "--out", str(tmp_path / "b")]) == 1


def test_sample_equilibrium(tmp_path):
    out = tmp_path / "eq"
    cfg = {"equilibrium": {"theta": 0.0, "samples": 1_000_000}}
    assert main(["sample-equilibrium", "--config", _write(tmp_path, "c.json", cfg), "--out", str(out)]) == 0
    rows = [ln.split("\t") for ln in (out / "marginal.tsv").read_text().splitlines()[1:]]
    z = np.array([int(a) for a, _ in rows])
    p = np.array([float(b) for _, b in rows])
    assert np.array_equal(z, -z[::-1]) and np.allclose(p, p[::-1], rtol=0, atol=1e-17)
    assert abs(p.sum() - 1) < 1e-12
    s = np.loadtxt(out / "samples.txt")
    m = build_marginal(ExponentialBricklayers(1.0), 0.0)
    assert abs(s.mean() - mean_density(m)) < 4 * math.sqrt(variance(m) / len(s))


def test_sample_equilibrium_divergent_theta(tmp_path):
    cfg = {"rate": {"family": "zero_range_linear_capped", "cap": 2.0}, "equilibrium": {"theta": 1.0}}
    assert main(["sample-equilibrium", "--config", _write(tmp_path, "c.json", cfg),
                 "--out", str(tmp_path / "x")]) == 2


def test_verify_exit_codes(tmp_path):
    out = str(tmp_path / "v")
    assert main(["verify", "--suite", "stationarity", "--out", out]) == 0
    doc = json.loads((tmp_path / "v" / "stationarity.json").read_text())
    assert doc["verdict"] == "pass" and doc["replicas"] == 10_000
    neg = {"suites": {"stationarity": {"boundary_rates": [2.0, 1.0]}}}
    assert main(["verify", "--config", _write(tmp_path, "n.json", neg), "--out", out]) == 1
    assert main(["verify", "--suite", "no_such_suite", "--out", out]) == 2
    bad = {"suites": {"stationarity": {"bogus": 1}}}
    assert main(["verify", "--config", _write(tmp_path, "b.json", bad), "--out", out]) == 2


def test_usage_and_runtime_errors(tmp_path):
    assert main(["frobnicate"]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2
    cfg = dict(SIM, max_events=5, T=50.0, replicas=1)
    out = tmp_path / "r"
    assert main(["simulate", "--config", _write(tmp_path, "c.json", cfg), "--out", str(out)]) == 3
    assert not out.exists() or not any(out.iterdir())
