"""Several processes on one set of Poisson planes.

Running members on common clocks realises the basic coupling: at a
channel where members have rates ``a <= b`` both jump at rate ``a`` and
only the faster one at rate ``b - a``.  Discrepancies ``d_i = zeta_i - omega_i``
between members are second class particles (``d > 0``) and antiparticles
(``d < 0``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import beta as beta_dist
from scipy.stats import norm

from .clocks import PoissonPlaneSet, derive_seed
from .dynamics import (DEFAULT_MAX_EVENTS, Kind, LatticeState, ProcessSpec, Trajectory, _Member,
                       run_members)
from .equilibrium import build_marginal, invert_density, mean_density, sample_marginal
from .rates import RateFunction


class RejectionExhausted(RuntimeError):
    def __init__(self, attempts: int, accepted: int):
        super().__init__(f"no acceptance in {attempts} attempts")
        self.attempts = attempts
        self.accepted = accepted


@dataclass
class CoupledRun:
    """Members ``(label, spec, initial state)`` sharing ``clocks`` and one site window."""

    members: list[tuple[str, ProcessSpec, LatticeState]]
    clocks: PoissonPlaneSet
    pairs: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        labels = [m[0] for m in self.members]
        if len(set(labels)) != len(labels):
            raise ValueError("member labels must be distinct")
        windows = {m[2].window for m in self.members}
        if len(windows) != 1:
            raise ValueError(f"members must share one window, got {sorted(windows)}")
        for a, b in self.pairs:
            if a not in labels or b not in labels:
                raise ValueError(f"unknown pair ({a}, {b})")
        specs = {m[0]: m[1] for m in self.members}
        for a, b in self.pairs:
            sa, sb = specs[a], specs[b]
            if (sa.kind is Kind.BOUNDARY and sb.kind is Kind.BOUNDARY
                    and sa.theta is not None and sb.theta is not None and sa.theta > sb.theta):
                raise ValueError(f"pair ({a}, {b}) needs theta({a}) <= theta({b})")

    @property
    def labels(self) -> list[str]:
        return [m[0] for m in self.members]

    @property
    def window(self) -> tuple[int, int]:
        return self.members[0][2].window


def discrepancy(lower: LatticeState, upper: LatticeState) -> np.ndarray:
    """``d_i = upper_i - lower_i`` on the common window."""
    return upper.omega - lower.omega


@dataclass
class CoupledResult:
    trajectories: dict[str, Trajectory]
    discrepancy: dict[tuple[str, str], list[tuple[float, dict[int, int]]]]
    stopped_at: float | None
    events: int

    def final(self, label: str) -> LatticeState:
        return self.trajectories[label].final


class OrderMonitor:
    """Counts events after which ``lower <= upper`` fails.

    ``what`` is ``"heights"`` (columns) or ``"omega"`` (sites); ``region`` is
    an inclusive index range, defaulting to everything.
    """

    def __init__(self, lower: str, upper: str, what: str = "heights",
                 region: tuple[int, int] | None = None):
        if what not in ("heights", "omega"):
            raise ValueError(what)
        self.lower, self.upper, self.what, self.region = lower, upper, what, region
        self.violations = 0
        self.first: tuple[float, int] | None = None
        self.checked = 0

    def check(self, t: float, states: dict[str, _Member]) -> None:
        a, b = states[self.lower], states[self.upper]
        xa = a.heights if self.what == "heights" else a.omega
        xb = b.heights if self.what == "heights" else b.omega
        lo = a.lo
        if self.region is None:
            ks = range(len(xa))
        else:
            ks = range(self.region[0] - lo, self.region[1] - lo + 1)
        self.checked += 1
        for k in ks:
            if xa[k] > xb[k]:
                self.violations += 1
                if self.first is None:
                    self.first = (t, k + lo)
                return


def run_coupled(run: CoupledRun, T: float, snapshot_times: Sequence[float] = (),
                monitors: Sequence[OrderMonitor] = (), check_discrepancy: bool = True,
                stop: Callable[[float, dict], bool] | None = None,
                max_events: int = DEFAULT_MAX_EVENTS) -> CoupledResult:
    members = [_Member(spec, state) for _, spec, state in run.members]
    by_label = dict(zip(run.labels, members))
    lo = run.window[0]
    d = {p: np.asarray(by_label[p[1]].omega) - np.asarray(by_label[p[0]].omega) for p in run.pairs}
    hist = {p: [(0.0, _sparse(v, lo))] for p, v in d.items()}
    n_events = 0
    for mon in monitors:
        mon.check(0.0, by_label)

    def monitor(t, _ms):
        nonlocal n_events
        n_events += 1
        for (a, b), v in d.items():
            ma, mb = by_label[a], by_label[b]
            ja = bool(ma.events) and ma.events[-1][0] == t
            jb = bool(mb.events) and mb.events[-1][0] == t
            if ja == jb:
                continue
            ev = (ma if ja else mb).events[-1]
            k = ev[1] - lo
            s = 1 if ja else -1
            v[k] += s
            v[k + 1] -= s
            if check_discrepancy:
                for kk in (k, k + 1):
                    if v[kk] != mb.omega[kk] - ma.omega[kk]:
                        raise AssertionError(f"discrepancy bookkeeping broke at t={t}, site {kk + lo}")
            hist[(a, b)].append((t, _sparse(v, lo)))
        for mon in monitors:
            mon.check(t, by_label)

    stop_fn = (lambda t, _ms: stop(t, by_label)) if stop is not None else None
    stopped = run_members(members, run.clocks, T, snapshot_times, max_events, monitor, stop_fn)
    end = T if stopped is None else stopped
    trajs = {}
    for (label, spec, state), m in zip(run.members, members):
        trajs[label] = Trajectory(spec, state.copy(), T, m.events,
                                  m.snapshots if stopped is None else m.snapshots[:-1],
                                  m.state(end), run.clocks.seed, stopped)
    return CoupledResult(trajs, hist, stopped, n_events)


def _sparse(v, lo: int) -> dict[int, int]:
    return {k + lo: int(x) for k, x in enumerate(v) if x}


@dataclass(frozen=True)
class Census:
    particles: int
    antiparticles: int
    particle_sites: tuple[int, ...]
    antiparticle_sites: tuple[int, ...]


def second_class_census(result: CoupledResult | None, pair: tuple[str, str], t: float,
                        states: tuple[LatticeState, LatticeState] | None = None) -> Census:
    """Second class particles (``d > 0``) and antiparticles (``d < 0``) of ``pair`` at time ``t``."""
    if states is None:
        a = result.trajectories[pair[0]].replay(t)
        b = result.trajectories[pair[1]].replay(t)
    else:
        a, b = states
    d = discrepancy(a, b)
    pos = np.nonzero(d > 0)[0]
    neg = np.nonzero(d < 0)[0]
    return Census(int(d[pos].sum()), int(-d[neg].sum()),
                  tuple(int(k) + a.lo for k in pos), tuple(int(k) + a.lo for k in neg))


def perturb(state: LatticeState, i: int) -> LatticeState:
    """``omega^{(i,i+1)}``: one brick added on column ``i``."""
    s = state.copy()
    k = i - s.lo
    s.omega[k] -= 1
    s.omega[k + 1] += 1
    s.heights[k] += 1
    return s


# conditional coupling

def window_slope(state: LatticeState, center: int = 0) -> float:
    """Finite-window analogue of the Cesaro slope: the larger one-sided
    average of ``|omega_j|`` over the sites left of and right of ``center``."""
    om = np.abs(state.omega)
    k0 = center - state.lo
    left = om[1:k0 + 1]
    right = om[k0 + 1:-1]
    vals = []
    if left.size:
        vals.append(left.sum() / left.size)
    if right.size:
        vals.append(right.sum() / right.size)
    return float(max(vals, default=0.0))


@dataclass
class ConditionalCouplingSetup:
    rate: RateFunction
    omega: LatticeState
    left: int
    right: int
    theta1: float
    theta2: float
    K: float

    def __post_init__(self):
        lo, hi = self.omega.window
        if lo > self.left - 1 or hi < self.right + 1:
            raise ValueError("omega window must cover the volume and its boundary sites")
        self.validate()

    def validate(self) -> None:
        e1 = mean_density(build_marginal(self.rate, self.theta1))
        e2 = mean_density(build_marginal(self.rate, self.theta2))
        if not e1 < -self.K <= self.K < e2:
            raise ValueError(f"densities must satisfy E1 < -K <= K < E2; got E1={e1:.6g}, "
                             f"K={self.K:.6g}, E2={e2:.6g}")

    @classmethod
    def build(cls, rate: RateFunction, omega: LatticeState, left: int, right: int,
              margin: float = 0.5) -> "ConditionalCouplingSetup":
        K = window_slope(omega)
        t1 = invert_density(rate, -(K + margin))
        t2 = invert_density(rate, K + margin)
        return cls(rate, omega, left, right, t1, t2, K)

    def profile(self, site: int) -> float:
        return self.theta2 if site <= 0 else self.theta1

    def sample_zeta(self, rng: np.random.Generator) -> LatticeState:
        lo, hi = self.omega.window
        u = rng.random(hi - lo + 1)
        z = np.array([sample_marginal(build_marginal_cached(self.rate, self.profile(i)), u[k])
                      for k, i in enumerate(range(lo, hi + 1))], dtype=np.int64)
        return LatticeState.from_omega(z, lo)

    def accepts(self, zeta: LatticeState) -> bool:
        """``g_i >= h_i`` on every window column."""
        return bool(np.all(zeta.heights >= self.omega.heights))


_MARGINALS: dict = {}


def build_marginal_cached(rate: RateFunction, theta: float):
    key = (rate, theta)
    m = _MARGINALS.get(key)
    if m is None:
        m = _MARGINALS[key] = build_marginal(rate, theta)
    return m


@dataclass
class ConditionalCouplingResult:
    accepted: bool
    attempts: int
    acceptance: float
    acceptance_ci: tuple[float, float]
    zeta: LatticeState | None
    result: CoupledResult | None
    monitor: OrderMonitor | None
    window_restricted: bool = True


def conditional_coupling(setup: ConditionalCouplingSetup, T: float, seed: int,
                         max_rejections: int = 10_000, min_attempts: int = 1,
                         clocks: PoissonPlaneSet | None = None) -> ConditionalCouplingResult:
    """Rejection-sample ``zeta`` from the step profile until its heights dominate
    ``omega``'s, then run ``omega`` as the ``[l, r]``-monotone process and
    ``zeta`` as the ``(l, r, theta1)``-process on shared clocks.

    ``min_attempts`` keeps sampling after the first acceptance so the
    acceptance-rate estimate is based on at least that many draws.
    """
    rng = np.random.Generator(np.random.Philox(derive_seed(seed, 0)))
    accepted_zeta = None
    n_acc = 0
    attempts = 0
    while attempts < max(max_rejections, min_attempts):
        z = setup.sample_zeta(rng)
        attempts += 1
        if setup.accepts(z):
            n_acc += 1
            if accepted_zeta is None:
                accepted_zeta = z
        if accepted_zeta is not None and attempts >= min_attempts:
            break
    ci = wilson_interval(n_acc, attempts)
    if accepted_zeta is None:
        return ConditionalCouplingResult(False, attempts, n_acc / attempts, ci, None, None, None)
    clocks = clocks or PoissonPlaneSet(derive_seed(seed, 1))
    w = ProcessSpec.monotone(setup.left, setup.right, setup.rate)
    zspec = ProcessSpec.boundary(setup.left, setup.right, setup.theta1, setup.rate)
    run = CoupledRun([("omega", w, setup.omega), ("zeta", zspec, accepted_zeta)], clocks,
                     [("omega", "zeta")])
    mon = OrderMonitor("omega", "zeta", "heights")
    res = run_coupled(run, T, monitors=[mon])
    return ConditionalCouplingResult(True, attempts, n_acc / attempts, ci, accepted_zeta, res, mon)


# annihilation

def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + level / 2)
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    a = 1 - level
    lo = 0.0 if k == 0 else float(beta_dist.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta_dist.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


@dataclass
class AnnihilationEstimate:
    times: list[float]
    counts: list[int]
    replicas: int
    estimates: list[float]
    intervals: list[tuple[float, float]]
    unresolved: int


def annihilation_time(rate: RateFunction, omega: LatticeState, volume: tuple[int, int], theta: float,
                      site: int, T: float, clocks: PoissonPlaneSet) -> float:
    """First time the unperturbed and the single-brick-perturbed boundary-driven
    processes agree on the whole window; ``inf`` if not by ``T``."""
    spec = ProcessSpec.boundary(volume[0], volume[1], theta, rate)
    zeta = perturb(omega, site)
    run = CoupledRun([("omega", spec, omega), ("zeta", spec, zeta)], clocks, [("omega", "zeta")])
    gap = [int(np.abs(zeta.omega - omega.omega).sum())]

    def stop(t, ms):
        a, b = ms["omega"], ms["zeta"]
        if (a.events and a.events[-1][0] == t) or (b.events and b.events[-1][0] == t):
            gap[0] = sum(abs(x - y) for x, y in zip(a.omega, b.omega))
        return gap[0] == 0

    res = run_coupled(run, T, stop=stop, check_discrepancy=False)
    return res.stopped_at if res.stopped_at is not None else math.inf


def annihilation_probability(rate: RateFunction, theta: float, site: int, times: Sequence[float],
                             replicas: int, seed: int, volume: tuple[int, int] = (-8, 8)) -> AnnihilationEstimate:
    """Fraction of replicas in which the perturbation pair has annihilated by each time.

    ``omega`` is drawn from the product equilibrium on the window; both
    processes run as the boundary-driven process with that ``theta``.
    """
    times = sorted(times)
    T = times[-1]
    m = build_marginal(rate, theta)
    lo, hi = volume[0] - 1, volume[1] + 1
    taus = np.empty(replicas)
    for k in range(replicas):
        s = derive_seed(seed, k)
        g = np.random.Generator(np.random.Philox(s))
        om = LatticeState.from_omega(sample_marginal(m, g.random(hi - lo + 1)), lo)
        taus[k] = annihilation_time(rate, om, volume, theta, site, T, PoissonPlaneSet(s))
    counts = [int(np.sum(taus <= t)) for t in times]
    return AnnihilationEstimate(list(times), counts, replicas, [c / replicas for c in counts],
                                [wilson_interval(c, replicas) for c in counts], int(np.sum(np.isinf(taus))))
