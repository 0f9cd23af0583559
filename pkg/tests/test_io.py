import os

import pytest

from bricklayers.clocks import PoissonPlaneSet
from bricklayers.dynamics import LatticeState, ProcessSpec, simulate
from bricklayers.io import atomic_write, load_snapshots, read_jsonl, snapshots_csv, write_trajectory
from bricklayers.rates import ExponentialBricklayers


def _traj():
    spec = ProcessSpec.boundary(-2, 2, 0.1, ExponentialBricklayers(1.0))
    return simulate(spec, LatticeState.flat(-3, 3), 2.0, PoissonPlaneSet(4), snapshot_times=[0.5, 1.0])


def test_trajectory_file(tmp_path):
    tr = _traj()
    p = write_trajectory(tmp_path / "t.jsonl", tr, {"note": "x"})
    recs = read_jsonl(p)
    assert recs[0]["type"] == "header" and recs[0]["seed"] == 4
    assert sum(r["type"] == "event" for r in recs) == len(tr.events)
    snaps = load_snapshots(p)
    assert snaps[-1] == tr.final and len(snaps) == 3


def test_inconsistent_snapshot_detected(tmp_path):
    p = write_trajectory(tmp_path / "t.jsonl", _traj(), {})
    text = p.read_text().replace('"heights":[', '"heights":[99,', 1)
    lines = p.read_text().splitlines()
    lines = [ln.replace('"heights":[', '"heights":[7,', 1) if '"type":"snapshot"' in ln else ln for ln in lines]
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError):
        load_snapshots(p)
    assert text


def test_csv_rows():
    tr = _traj()
    rows = snapshots_csv(tr).splitlines()
    assert len(rows) == 1 + 1 + 2 + 1
    assert rows[0].startswith("t,omega_-3")


def test_atomic_write_leaves_nothing_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "out.txt"
    atomic_write(target, "old\n")

    def boom(*a, **k):
        raise OSError("disk gone")
    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        atomic_write(target, "new\n")
    assert target.read_text() == "old\n"
    assert os.listdir(tmp_path) == ["out.txt"]
