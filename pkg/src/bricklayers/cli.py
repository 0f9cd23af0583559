"""Command line runner: ``bricklayers {sample-equilibrium,simulate,couple,verify}``.

Exit codes: 0 success, 1 a check failed or a window did not stabilize,
2 usage or configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import inspect
import logging
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .clocks import PoissonPlaneSet, derive_seed
from .config import ConfigError, ExperimentConfig
from .coupling import CoupledRun, perturb, run_coupled
from .dynamics import LatticeState, simulate, window_limit
from .equilibrium import DivergentSeriesError, build_marginal, mean_density, sample_marginal
from .io import atomic_write, discrepancy_lines, dumps, snapshots_csv, trajectory_lines
from .verify.checks import summary_table
from .verify.suites import SUITES

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
REPLICA_KEYS = ("replicas", "runs", "seeds", "draws")

log = logging.getLogger("bricklayers")


class UsageError(Exception):
    pass


def replica_seed(master: int, k: int) -> int:
    """Seed of replica ``k``: ``splitmix64(splitmix64(master) ^ k)``."""
    return derive_seed(master, k)


def _initial_rng(seed: int) -> np.random.Generator:
    # stream 1 of the replica seed; the clocks use the replica seed itself
    return np.random.Generator(np.random.Philox(derive_seed(seed, 1)))


def _manifest(cfg: ExperimentConfig, command: str, seeds: list[int], **extra) -> str:
    return dumps({"command": command, "config": cfg.to_dict(), "seeds": seeds, **extra}) + "\n"


# sample-equilibrium

def cmd_sample_equilibrium(cfg: ExperimentConfig) -> int:
    rate = cfg.rate_function()
    theta = float(cfg.equilibrium.get("theta", 0.0))
    n = int(cfg.equilibrium.get("samples", 10_000))
    m = build_marginal(rate, theta)
    out = Path(cfg.output)
    rng = np.random.Generator(np.random.Philox(replica_seed(cfg.seed, 0)))
    samples = np.atleast_1d(sample_marginal(m, rng.random(n)))
    atomic_write(out / "marginal.tsv", "z\tpmf\n" + "".join(f"{int(z)}\t{float(p)!r}\n" for z, p in zip(m.support, m.pmf)))
    atomic_write(out / "samples.txt", "".join(f"{int(z)}\n" for z in samples))
    atomic_write(out / "run.json", _manifest(cfg, "sample-equilibrium", [replica_seed(cfg.seed, 0)],
                                              Z=m.Z, mean_density=mean_density(m), tail_bound=m.tail_bound))
    print(f"theta={theta}  Z={m.Z:.12g}  density={mean_density(m):.12g}  samples={n}  -> {out}")
    return EXIT_OK


# simulate

def _simulate_one(cfg_dict: dict, k: int) -> tuple[int, str, str | None, dict]:
    cfg = ExperimentConfig.from_dict(cfg_dict)
    seed = replica_seed(cfg.seed, k)
    header = {"config": cfg_dict, "replica": k}
    if cfg.window_limit is not None:
        wl = cfg.window_limit
        spec = cfg.process_spec()
        init = cfg.initial_state(spec, _initial_rng(seed))
        res = window_limit(cfg.rate_function(), init, tuple(wl["target"]), cfg.T, PoissonPlaneSet(seed),
                           w=wl.get("w"), k_max=wl.get("k_max", 12), max_events=cfg.max_events)
        info = {"stabilized": res.stabilized, "radius": res.radius, "doublings": res.doublings,
                "volumes": [list(v) for v in res.volumes]}
        lines = [dumps({"type": "header", **header, "seed": seed, "T": cfg.T, "window_limit": info})]
        lines += [dumps({"type": "event", "t": t, "i": i, "dir": "RL"[d]}) for t, i, d in res.events]
        lines.append(dumps({"type": "final", "heights": {str(i): h for i, h in res.heights.items()}}))
        return seed, "".join(s + "\n" for s in lines), None, info
    spec = cfg.process_spec()
    init = cfg.initial_state(spec, _initial_rng(seed))
    traj = simulate(spec, init, cfg.T, PoissonPlaneSet(seed), snapshot_times=cfg.snapshots,
                    max_events=cfg.max_events)
    body = "".join(s + "\n" for s in trajectory_lines(traj, header))
    csv = snapshots_csv(traj) if cfg.format == "csv" else None
    return seed, body, csv, {"stabilized": True, "events": len(traj.events)}


def _map(fn, cfg: ExperimentConfig, ks: range):
    d = cfg.to_dict()
    workers = min(cfg.workers, len(ks))
    if workers <= 1:
        return [fn(d, k) for k in ks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, [d] * len(ks), ks))


def cmd_simulate(cfg: ExperimentConfig) -> int:
    out = Path(cfg.output)
    results = _map(_simulate_one, cfg, range(cfg.replicas))
    seeds = []
    unstable = []
    for k, (seed, body, csv, info) in enumerate(results):
        seeds.append(seed)
        atomic_write(out / f"replica_{k:04d}.jsonl", body)
        if csv is not None:
            atomic_write(out / f"replica_{k:04d}.csv", csv)
        if not info["stabilized"]:
            unstable.append(k)
    atomic_write(out / "run.json", _manifest(cfg, "simulate", seeds, unstable=unstable))
    print(f"{len(results)} replica(s) -> {out}")
    if unstable:
        print(f"window did not stabilize for replicas {unstable}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# couple

def _members(cfg: ExperimentConfig, seed: int) -> CoupledRun:
    if not cfg.couple or not cfg.couple.get("members"):
        raise ConfigError("couple needs a 'couple.members' list")
    members = []
    window = None
    for m in cfg.couple["members"]:
        spec = cfg.process_spec(m["process"])
        if window is None:
            window = cfg.window or list(spec.window)
        sub = cfg.override(window=window)
        # every member draws its initial state from the same uniforms
        state = sub.initial_state(spec, _initial_rng(seed), m.get("initial"))
        if "perturb" in m:
            state = perturb(state, int(m["perturb"]))
        members.append((m["label"], spec, state))
    pairs = [tuple(p) for p in cfg.couple.get("pairs", [])]
    return CoupledRun(members, PoissonPlaneSet(seed), pairs)


def _couple_one(cfg_dict: dict, k: int):
    cfg = ExperimentConfig.from_dict(cfg_dict)
    seed = replica_seed(cfg.seed, k)
    run = _members(cfg, seed)
    res = run_coupled(run, cfg.T, cfg.snapshots, max_events=cfg.max_events)
    files = {}
    for label, traj in res.trajectories.items():
        header = {"config": cfg_dict, "replica": k, "label": label}
        files[f"{label}.jsonl"] = "".join(s + "\n" for s in trajectory_lines(traj, header))
    files["discrepancy.jsonl"] = "".join(s + "\n" for s in discrepancy_lines(res.discrepancy))
    return seed, files


def cmd_couple(cfg: ExperimentConfig) -> int:
    out = Path(cfg.output)
    _members(cfg, replica_seed(cfg.seed, 0))  # validate before fanning out
    results = _map(_couple_one, cfg, range(cfg.replicas))
    seeds = []
    for k, (seed, files) in enumerate(results):
        seeds.append(seed)
        for name, body in files.items():
            atomic_write(out / f"replica_{k:04d}" / name, body)
    atomic_write(out / "run.json", _manifest(cfg, "couple", seeds))
    print(f"{len(results)} coupled replica(s) -> {out}")
    return EXIT_OK


# verify

def suite_kwargs(name: str, cfg: ExperimentConfig, replicas: int | None) -> dict:
    fn = SUITES[name]
    params = inspect.signature(fn).parameters
    kw = dict(cfg.suites.get(name, {}))
    unknown = set(kw) - set(params)
    if unknown:
        raise UsageError(f"suite {name!r} has no parameter(s) {sorted(unknown)}")
    if "rate" in params:
        kw["rate"] = cfg.rate_function()
    if "seed" in params:
        kw.setdefault("seed", cfg.seed)
    if replicas is not None:
        for key in REPLICA_KEYS:
            if key in params:
                kw[key] = replicas
                break
    return kw


def cmd_verify(cfg: ExperimentConfig, suites: list[str] | None, replicas: int | None = None) -> int:
    names = suites or list(cfg.suites)
    if not names:
        raise UsageError("no suites requested (use --suite or the 'suites' config key)")
    bad = [s for s in names if s not in SUITES]
    if bad:
        raise UsageError(f"unknown suite(s) {bad}; available: {', '.join(SUITES)}")
    kws = {s: suite_kwargs(s, cfg, replicas) for s in names}
    out = Path(cfg.output)
    results = []
    for s in names:
        r = SUITES[s](**kws[s])
        doc = r.to_dict()
        doc["config"] = cfg.to_dict()
        atomic_write(out / f"{s}.json", dumps(doc) + "\n")
        print(dumps(r.to_dict()))
        results.append(r)
    table = summary_table(results)
    atomic_write(out / "summary.txt", table + "\n")
    print(table)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bricklayers", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("sample-equilibrium", "simulate", "couple", "verify"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON experiment config")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--replicas", type=int)
        sp.add_argument("--workers", type=int)
        if name == "verify":
            sp.add_argument("--suite", action="append", help="suite name (repeatable)")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        over = {"seed": args.seed, "output": args.out, "workers": args.workers}
        if args.command != "verify":
            over["replicas"] = args.replicas
        cfg = cfg.override(**over)
        if args.command == "sample-equilibrium":
            return cmd_sample_equilibrium(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "couple":
            return cmd_couple(cfg)
        return cmd_verify(cfg, args.suite, args.replicas)
    except (UsageError, ConfigError, FileNotFoundError, DivergentSeriesError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001
        if args.verbose:
            traceback.print_exc()
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
