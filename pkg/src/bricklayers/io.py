"""Output records: JSON lines, CSV snapshots, atomic writes."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from .dynamics import LatticeState, Trajectory

DIR_NAMES = {0: "R", 1: "L"}


def atomic_write(path: str | Path, data: str | bytes) -> Path:
    """Write to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)


def _default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x)}")


def snapshot_record(s: LatticeState) -> dict:
    return {"type": "snapshot", "t": s.time, "lo": s.lo, "omega": s.omega.tolist(), "heights": s.heights.tolist()}


def trajectory_lines(traj: Trajectory, header: dict) -> Iterable[str]:
    yield dumps({"type": "header", **header, "spec": traj.spec.to_config(), "seed": traj.seed,
                 "window": list(traj.initial.window), "T": traj.T,
                 "initial": snapshot_record(traj.initial)})
    for t, i, d in traj.events:
        yield dumps({"type": "event", "t": t, "i": i, "dir": DIR_NAMES[d]})
    for s in traj.snapshots:
        yield dumps(snapshot_record(s))
    yield dumps({**snapshot_record(traj.final), "type": "final"})


def write_trajectory(path, traj: Trajectory, header: dict) -> Path:
    return atomic_write(path, "".join(line + "\n" for line in trajectory_lines(traj, header)))


def snapshots_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    lo, hi = traj.initial.window
    w.writerow(["t"] + [f"omega_{i}" for i in range(lo, hi + 1)] + [f"h_{i}" for i in range(lo, hi)])
    for s in [traj.initial, *traj.snapshots, traj.final]:
        w.writerow([repr(float(s.time))] + s.omega.tolist() + s.heights.tolist())
    return buf.getvalue()


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_snapshots(path, check: bool = True) -> list[LatticeState]:
    """Snapshot and final states of a trajectory file, each re-checked for
    height/increment consistency."""
    out = []
    for rec in read_jsonl(path):
        if rec["type"] in ("snapshot", "final"):
            s = LatticeState(rec["lo"], rec["omega"], rec["heights"], rec["t"])
            if check and not s.consistent():
                raise ValueError(f"inconsistent heights in {path} at t={s.time}")
            out.append(s)
    return out


def discrepancy_lines(history: dict) -> Iterable[str]:
    for (a, b), rows in history.items():
        for t, d in rows:
            yield dumps({"t": t, "pair": [a, b], "d": {str(k): v for k, v in d.items()}})
