"""Verification suites: each returns a :class:`CheckResult`."""
from __future__ import annotations

import itertools
import math
import time
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from ..batch import simulate_batch
from ..clocks import PoissonPlaneSet, derive_seed
from ..coupling import CoupledRun, OrderMonitor, annihilation_probability, run_coupled
from ..dynamics import LatticeState, ProcessSpec, simulate, window_limit
from ..equilibrium import (GoodMeasureSpec, build_marginal, common_support, mean_rates, monotone_coupled_sample,
                           sample_marginal, sample_profile)
from ..rates import RateFunction, Regime, log_factorials
from .checks import FAIL, INCONCLUSIVE, PASS, CheckResult
from .generator import CylinderFunction, apply_generator, generator_mean_zero
from .oracles import total_variation, transient_law


def _rng(seed: int, k: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(derive_seed(seed, k)))


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


def sample_equilibrium(rate: RateFunction, theta: float, lo: int, hi: int, replicas: int,
                       rng: np.random.Generator) -> np.ndarray:
    m = build_marginal(rate, theta)
    return sample_marginal(m, rng.random((replicas, hi - lo + 1))).reshape(replicas, hi - lo + 1)


def equilibrium_expectation(rate: RateFunction, theta: float, phi: CylinderFunction) -> float:
    m = build_marginal(rate, theta)
    z, p = m.support, m.pmf
    w = phi.width
    if w > 3:
        raise ValueError("exact expectation only for supports of width <= 3")
    grid = np.array(list(itertools.product(z, repeat=w)))
    prob = np.prod(np.array(list(itertools.product(p, repeat=w))), axis=1)
    return float(np.sum(phi.f(grid) * prob))


def default_phis(volume: tuple[int, int]) -> list[CylinderFunction]:
    left, right = volume
    return [CylinderFunction.coordinate(left), CylinderFunction.coordinate(0),
            CylinderFunction.indicator(0, 0), CylinderFunction.coordinate(right)]


# exact suites

def equilibrium_check(rate: RateFunction, thetas: Sequence[float] = (-1.0, 0.0, 0.7, 1.0),
                      z_oracle_width: int = 40, tol_z: float = 1e-10, tol_rates: float = 1e-9,
                      seed: int = 0) -> CheckResult:
    """Normaliser at theta=0 against a plain summation and the mean-rate identity."""
    t0 = time.perf_counter()
    zr = rate.regime is Regime.ZERO_RANGE
    zs = range(0 if zr else -z_oracle_width, z_oracle_width + 1)
    lf = log_factorials(rate, z_oracle_width)
    oracle = math.fsum(math.exp(-lf[abs(z)]) for z in zs)
    errs = {"Z(0)": abs(build_marginal(rate, 0.0).Z - oracle)}
    for th in thetas:
        right, left = mean_rates(build_marginal(rate, th))
        errs[f"E r(w) theta={th}"] = abs(right - math.exp(th))
        if not zr:
            errs[f"E r(-w) theta={th}"] = abs(left - math.exp(-th))
    stat = max(errs["Z(0)"] / tol_z, max(v for k, v in errs.items() if k != "Z(0)") / tol_rates)
    return CheckResult("equilibrium", stat, 1.0, "<", _verdict(stat < 1.0), 0, [seed],
                       time.perf_counter() - t0, {"errors": errs, "Z_oracle": oracle})


def domination_check(rate: RateFunction, pairs=((-1.0, -0.5), (-0.5, 0.0), (0.0, 0.3), (0.3, 1.0), (-2.0, 2.0)),
                     draws: int = 100_000, seed: int = 0) -> CheckResult:
    t0 = time.perf_counter()
    bad = 0
    for k, (a, b) in enumerate(pairs):
        u = _rng(seed, k).random(draws)
        m1, m2 = common_support(build_marginal(rate, a), build_marginal(rate, b))
        bad += int(np.sum(sample_marginal(m1, u) > sample_marginal(m2, u)))
        monotone_coupled_sample(m1, m2, u[:10])
    return CheckResult("domination", bad, 0, "==", _verdict(bad == 0), draws * len(pairs), [seed],
                       time.perf_counter() - t0, {"pairs": [list(p) for p in pairs]})


def generator_check(rate: RateFunction, thetas: Sequence[float] = (0.0, 0.5), volume=(-1, 1), M: int = 12,
                    tol: float = 1e-8, seed: int = 0) -> CheckResult:
    t0 = time.perf_counter()
    phis = [CylinderFunction.indicator(0, 0), CylinderFunction.coordinate(0)]
    res = {}
    for th in thetas:
        for phi in phis:
            g = generator_mean_zero(rate, th, volume[0], volume[1], phi, M)
            res[f"{phi.name} theta={th}"] = {"residual": g.residual, "tail_estimate": g.tail_estimate}
    stat = max(abs(v["residual"]) for v in res.values())
    return CheckResult("generator", stat, tol, "<", _verdict(stat < tol), 0, [seed],
                       time.perf_counter() - t0, {"residuals": res, "M": M, "volume": list(volume)})


def ctmc_check(rate: RateFunction, theta: float = 0.0, t: float = 0.5, replicas: int = 100_000,
               clamp: int = 3, seed: int = 0, tv_tol: float = 0.02, engine: str = "clocks") -> CheckResult:
    """Time-``t`` law of site 0 for the clamped one-site boundary-driven process
    against the matrix exponential of its generator."""
    t0 = time.perf_counter()
    spec = ProcessSpec.boundary(0, 0, theta, rate, clamp=clamp)
    oracle = transient_law(spec, (0,), t).marginal(0)
    wide = transient_law(ProcessSpec.boundary(0, 0, theta, rate, clamp=max(20, 4 * clamp)), (0,), t).marginal(0)
    budget = total_variation(oracle, wide)
    init = LatticeState.flat(-1, 1)
    if engine == "clocks":
        vals = np.empty(replicas, dtype=np.int64)
        for k in range(replicas):
            tr = simulate(spec, init, t, PoissonPlaneSet(derive_seed(seed, k)))
            vals[k] = tr.final.w(0)
    else:
        res = simulate_batch(spec, np.zeros((replicas, 3), dtype=np.int64), -1, t, _rng(seed))
        vals = res.omega[:, 1]
    zs, counts = np.unique(vals, return_counts=True)
    emp = {int(z): c / replicas for z, c in zip(zs, counts)}
    tv = total_variation(emp, oracle)
    thr = tv_tol + budget
    return CheckResult(f"ctmc[{engine}]", tv, thr, "<", _verdict(tv < thr), replicas, [seed],
                       time.perf_counter() - t0,
                       {"oracle": oracle, "empirical": emp, "truncation_budget": budget, "t": t})


# pathwise coupling suites

def attractivity_check(rate: RateFunction, runs: int = 2000, T: float = 2.0, extent: int = 8,
                       theta: float = 0.0, seed: int = 0) -> CheckResult:
    """Random nested volumes on shared clocks; counts events after which an
    ordering fails: heights of the inner monotone process below those of an
    outer monotone and an outer boundary-driven process, and increments on
    the inner volume between its left- and right-extended versions."""
    t0 = time.perf_counter()
    lo, hi = -extent - 1, extent + 1
    m = build_marginal(rate, theta)
    totals = {"heights<=outer": 0, "heights<=boundary": 0, "omega<=left_ext": 0, "omega>=right_ext": 0}
    checked = 0
    for k in range(runs):
        g = _rng(seed, k)
        a, b = sorted(g.choice(np.arange(-extent + 1, extent), size=2, replace=False).tolist())
        L = int(g.integers(-extent, a + 1))
        R = int(g.integers(b, extent + 1))
        Lx = int(g.integers(-extent, a))
        Rx = int(g.integers(b + 1, extent + 1))
        om = LatticeState.from_omega(sample_marginal(m, g.random(hi - lo + 1)), lo)
        members = [
            ("inner", ProcessSpec.monotone(a, b, rate), om),
            ("outer", ProcessSpec.monotone(L, R, rate), om),
            ("boundary", ProcessSpec.boundary(L, R, theta, rate), om),
            ("left_ext", ProcessSpec.monotone(Lx, b, rate), om),
            ("right_ext", ProcessSpec.monotone(a, Rx, rate), om),
        ]
        mons = {
            "heights<=outer": OrderMonitor("inner", "outer", "heights"),
            "heights<=boundary": OrderMonitor("inner", "boundary", "heights"),
            "omega<=left_ext": OrderMonitor("inner", "left_ext", "omega", (a, b)),
            "omega>=right_ext": OrderMonitor("right_ext", "inner", "omega", (a, b)),
        }
        run_coupled(CoupledRun(members, PoissonPlaneSet(derive_seed(seed, k))), T,
                    monitors=list(mons.values()), check_discrepancy=False)
        for name, mon in mons.items():
            totals[name] += mon.violations
        checked += mons["heights<=outer"].checked
    v = sum(totals.values())
    return CheckResult("attractivity", v, 0, "==", _verdict(v == 0), runs, [seed], time.perf_counter() - t0,
                       {"violations": totals, "events_checked": checked, "T": T, "extent": extent})


def sandwich_check(rate: RateFunction, runs: int = 1000, T: float = 2.0, volume=(-5, 5),
                   theta1: float = -0.5, theta2: float = 0.5, seed: int = 0) -> CheckResult:
    """eta <= zeta <= xi on the volume, started from a step-profile good measure."""
    t0 = time.perf_counter()
    left, right = volume
    lo, hi = left - 1, right + 1
    gm = GoodMeasureSpec.step(rate, theta1, theta2)
    gm.certify(range(lo, hi + 1))
    v_low = v_up = 0
    checked = 0
    for k in range(runs):
        u = _rng(seed, k).random(hi - lo + 1)
        eta = sample_marginal(gm.lower, u)
        xi = sample_marginal(gm.upper, u)
        zeta = sample_profile(gm, (lo, hi), u)
        if np.any(eta > zeta) or np.any(zeta > xi):
            v_low += 1
            continue
        states = [LatticeState.from_omega(x, lo) for x in (eta, zeta, xi)]
        members = [("eta", ProcessSpec.boundary(left, right, theta1, rate), states[0]),
                   ("zeta", ProcessSpec.boundary(left, right, theta1, rate), states[1]),
                   ("xi", ProcessSpec.boundary(left, right, theta2, rate), states[2])]
        lower = OrderMonitor("eta", "zeta", "omega", (left, right))
        upper = OrderMonitor("zeta", "xi", "omega", (left, right))
        run_coupled(CoupledRun(members, PoissonPlaneSet(derive_seed(seed, k)),
                               [("eta", "zeta"), ("zeta", "xi")]), T, monitors=[lower, upper])
        v_low += lower.violations
        v_up += upper.violations
        checked += lower.checked
    v = v_low + v_up
    return CheckResult("sandwich", v, 0, "==", _verdict(v == 0), runs, [seed], time.perf_counter() - t0,
                       {"eta<=zeta": v_low, "zeta<=xi": v_up, "events_checked": checked})


def window_check(rate: RateFunction, seeds: int = 1000, target=(-2, 2), T: float = 1.0,
                 max_doublings: int = 6, required: float = 0.99, seed: int = 0, extent: int = 600) -> CheckResult:
    t0 = time.perf_counter()
    init = LatticeState.flat(-extent, extent)
    ok = 0
    identical = 0
    radii = []
    for k in range(seeds):
        res = window_limit(rate, init, tuple(target), T, PoissonPlaneSet(derive_seed(seed, k)))
        if res.stabilized:
            identical += int(res.consecutive_identical)
            radii.append(res.radius)
            if res.doublings <= max_doublings:
                ok += 1
    frac = ok / seeds
    # a stabilised run whose last two restricted trajectories differ counts as a failure
    stat = frac if identical == len(radii) else -1.0
    return CheckResult("window", stat, required, ">=", _verdict(stat >= required), seeds, [seed], time.perf_counter() - t0,
                       {"stabilized": len(radii), "identical_consecutive": identical,
                        "radius_histogram": {str(r): radii.count(r) for r in sorted(set(radii))}})


def annihilation_check(rate: RateFunction, theta: float = 0.0, times=(0.1, 0.5, 1.0), replicas: int = 10_000,
                       site: int = 0, volume=(-8, 8), at: float = 0.5, seed: int = 0) -> CheckResult:
    t0 = time.perf_counter()
    est = annihilation_probability(rate, theta, site, times, replicas, seed, tuple(volume))
    k = est.times.index(at)
    lo_ci = est.intervals[k][0]
    mono = all(a <= b for a, b in zip(est.estimates, est.estimates[1:]))
    return CheckResult("annihilation", lo_ci, 0.0, ">", _verdict(lo_ci > 0 and mono), replicas, [seed],
                       time.perf_counter() - t0,
                       {"times": est.times, "estimates": est.estimates, "intervals": est.intervals,
                        "nondecreasing": mono, "unresolved": est.unresolved})


# Monte Carlo suites

def _chi_square(values: np.ndarray, m, min_expected: float = 5.0) -> float:
    n = len(values)
    zs = m.support
    exp = m.pmf * n
    obs = np.array([np.sum(values == z) for z in zs], dtype=float)
    below = np.sum(values < zs[0])
    above = np.sum(values > zs[-1])
    obs[0] += below
    obs[-1] += above
    # merge sparse tails inward
    lo_k = 0
    while exp[:lo_k + 1].sum() < min_expected:
        lo_k += 1
    hi_k = len(zs) - 1
    while exp[hi_k:].sum() < min_expected:
        hi_k -= 1
    e = np.concatenate(([exp[:lo_k + 1].sum()], exp[lo_k + 1:hi_k], [exp[hi_k:].sum()]))
    o = np.concatenate(([obs[:lo_k + 1].sum()], obs[lo_k + 1:hi_k], [obs[hi_k:].sum()]))
    e *= o.sum() / e.sum()
    if len(e) < 2:
        return 1.0
    return float(stats.chisquare(o, e).pvalue)


def stationarity_test(rate: RateFunction, theta: float = 0.0, volume=(-3, 3), t: float = 5.0,
                      replicas: int = 10_000, phis: Sequence[CylinderFunction] | None = None,
                      seed: int = 0, boundary_rates: Sequence[float] | None = None,
                      alpha: float = 0.01) -> CheckResult:
    """Start from the product equilibrium, run the boundary-driven process to ``t``
    and compare ``phi(omega(0))`` with ``phi(omega(t))`` replica by replica;
    also chi-square of ``omega_0(t)`` against the marginal.  Bonferroni over all tests."""
    t0 = time.perf_counter()
    left, right = volume
    lo, hi = left - 1, right + 1
    phis = list(phis) if phis is not None else default_phis(volume)
    br = tuple(boundary_rates) if boundary_rates is not None else None
    spec = ProcessSpec.boundary(left, right, theta, rate, boundary_rates=br)
    rng = _rng(seed)
    om0 = sample_equilibrium(rate, theta, lo, hi, replicas, rng)
    res = simulate_batch(spec, om0, lo, t, rng)
    pvals = {}
    for phi in phis:
        d = phi.on(res.omega, lo) - phi.on(om0, lo)
        if np.all(d == d[0]):
            pvals[phi.name] = 1.0 if d[0] == 0 else 0.0
        else:
            pvals[phi.name] = float(stats.ttest_1samp(d, 0.0).pvalue)
    m = build_marginal(rate, theta)
    pvals["chi2 w_0(t)"] = _chi_square(res.omega[:, -lo], m)
    corrected = {k: min(1.0, v * len(pvals)) for k, v in pvals.items()}
    stat = min(corrected.values())
    return CheckResult("stationarity", stat, alpha, ">", _verdict(stat > alpha), replicas, [seed],
                       time.perf_counter() - t0,
                       {"p_values": pvals, "corrected": corrected, "theta": theta, "t": t,
                        "volume": list(volume), "boundary_rates": list(spec.virtual_rates)})


def growth_bound_check(rate: RateFunction, theta1: float = 0.0, theta2: float = 0.0, volume=(-5, 5),
                       t_grid: Sequence[float] = (0.5, 1.0, 2.0), replicas: int = 10_000,
                       seed: int = 0, z_max: float = 3.0) -> CheckResult:
    """Column growth of the ``(l, r, theta1)``-process from a good measure.

    Every column's mean growth must stay below ``t (e^theta2 + e^-theta1)``
    plus ``z_max`` standard errors.  With ``theta1 == theta2`` the start is
    stationary and the bound is an equality in law, so the column-averaged
    growth must also lie within ``z_max`` standard errors of it.
    """
    t0 = time.perf_counter()
    left, right = volume
    lo, hi = left - 1, right + 1
    zr = rate.regime is Regime.ZERO_RANGE
    B = math.exp(theta2) + (0.0 if zr else math.exp(-theta1))
    rng = _rng(seed)
    if theta1 == theta2:
        om0 = sample_equilibrium(rate, theta1, lo, hi, replicas, rng)
    else:
        gm = GoodMeasureSpec.step(rate, theta1, theta2)
        gm.certify(range(lo, hi + 1))
        om0 = sample_profile(gm, (lo, hi), rng.random((replicas, hi - lo + 1)))
    spec = ProcessSpec.boundary(left, right, theta1, rate)
    res = simulate_batch(spec, om0, lo, max(t_grid), rng, snapshot_times=t_grid)
    per_t = {}
    worst = -math.inf
    for s, tt in enumerate(res.snapshot_times):
        g = res.snapshot_growth[s].astype(float)
        mean = g.mean(axis=0)
        se = g.std(axis=0, ddof=1) / math.sqrt(replicas)
        z_cols = np.where(se > 0, (mean - B * tt) / np.where(se > 0, se, 1), 0.0)
        pooled = g.mean(axis=1)
        p_mean, p_se = pooled.mean(), pooled.std(ddof=1) / math.sqrt(replicas)
        z_pool = (p_mean - B * tt) / p_se if p_se > 0 else 0.0
        worst = max(worst, float(z_cols.max()))
        if theta1 == theta2:
            worst = max(worst, abs(float(z_pool)))
        per_t[f"{tt:g}"] = {"bound": B * tt, "column_means": mean.tolist(), "column_se": se.tolist(),
                            "pooled_mean": float(p_mean), "pooled_se": float(p_se),
                            "max_column_z": float(z_cols.max()), "pooled_z": float(z_pool),
                            "second_moment": float((g ** 2).mean())}
    ts = np.asarray(res.snapshot_times)
    m2 = np.array([per_t[f"{x:g}"]["second_moment"] for x in ts])
    coef = np.polyfit(ts, m2, 2).tolist() if len(ts) >= 3 else None
    return CheckResult("growth", worst, z_max, "<=", _verdict(worst <= z_max), replicas, [seed],
                       time.perf_counter() - t0,
                       {"rate_bound": B, "per_t": per_t, "second_moment_quadratic": coef,
                        "second_moment_finite": bool(np.all(np.isfinite(m2))),
                        "theta1": theta1, "theta2": theta2, "volume": list(volume)})


def block_growth_decay(rate: RateFunction, theta: float = 0.0, t: float = 0.05,
                       i_grid: Sequence[int] = tuple(range(-2, -9, -1)), replicas: int = 1_000_000,
                       volume=(-10, 2), seed: int = 0, chunk: int = 100_000) -> CheckResult:
    """Probability that every column ``i..0`` has grown by ``t``, and the slope of
    its logarithm against ``|i|``."""
    t0 = time.perf_counter()
    left, right = volume
    lo, hi = left - 1, right + 1
    if min(i_grid) < left - 1 or right < 0:
        raise ValueError("volume must contain columns i..0")
    spec = ProcessSpec.boundary(left, right, theta, rate)
    cols = list(spec.columns)
    k0 = cols.index(0)
    counts = {i: 0 for i in i_grid}
    for c, start in enumerate(range(0, replicas, chunk)):
        n = min(chunk, replicas - start)
        rng = _rng(seed, c)
        om0 = sample_equilibrium(rate, theta, lo, hi, n, rng)
        res = simulate_batch(spec, om0, lo, t, rng)
        grew = res.growth > 0
        # all columns j..0 grew, for j running leftwards from 0
        block = np.logical_and.accumulate(grew[:, k0::-1], axis=1)
        for i in i_grid:
            counts[i] += int(block[:, -i].sum())
    p = {i: counts[i] / replicas for i in i_grid}
    xs = np.array([abs(i) for i in i_grid if counts[i] > 0], dtype=float)
    ps = np.array([p[i] for i in i_grid if counts[i] > 0])
    dropped = [i for i in i_grid if counts[i] == 0]
    details = {"probabilities": {str(i): p[i] for i in i_grid}, "counts": {str(i): counts[i] for i in i_grid},
               "dropped": dropped, "t": t}
    runtime = lambda: time.perf_counter() - t0  # noqa: E731
    if ps.size and ps.min() > 0.99:
        details["reason"] = "t too large: probabilities near 1"
        return CheckResult("block_growth", math.nan, 0.0, "<", INCONCLUSIVE, replicas, [seed], runtime(), details)
    if xs.size < 2:
        details["reason"] = "fewer than two nonzero probabilities"
        return CheckResult("block_growth", math.nan, 0.0, "<", INCONCLUSIVE, replicas, [seed], runtime(), details)
    y = np.log(ps)
    var = (1 - ps) / (replicas * ps)
    w = 1 / var
    X = np.column_stack([np.ones_like(xs), xs])
    cov = np.linalg.inv(X.T @ (w[:, None] * X))
    beta = cov @ X.T @ (w * y)
    slope, se = float(beta[1]), float(math.sqrt(cov[1, 1]))
    ci = (slope - 1.96 * se, slope + 1.96 * se)
    ordered = [p[i] for i in sorted(i_grid, key=abs)]
    monotone = all(a >= b for a, b in zip(ordered, ordered[1:]))
    details.update({"slope": slope, "slope_se": se, "slope_ci": list(ci), "monotone": monotone})
    stat = ci[1] if monotone else math.inf
    return CheckResult("block_growth", stat, 0.0, "<", _verdict(stat < 0), replicas, [seed], runtime(), details)


def forward_equation_check(rate: RateFunction, phis: Sequence[CylinderFunction] | None = None,
                           t_grid: Sequence[float] | None = None, replicas: int = 200_000,
                           volume=(-8, 8), seed: int = 0, z_crit: float = 1.96) -> CheckResult:
    """Short-time behaviour of ``S(t) phi`` at the flat state.

    Per replica, the derivative at 0 is read off a least-squares fit of
    ``phi(omega(t)) - phi(omega)`` by ``a t + b t^2 + c t^3`` on the grid; the
    fitted ``a`` must fall within ``z_crit`` standard errors of the exact
    ``L phi``.  The integrated equation is checked at the last grid time
    with a trapezoid rule for ``int_0^t L phi(omega(s)) ds``.
    """
    t0 = time.perf_counter()
    phis = list(phis) if phis is not None else [CylinderFunction.indicator(0, 0), CylinderFunction.indicator_ge(0, 1)]
    grid = np.asarray(t_grid if t_grid is not None else np.linspace(0.02, 0.2, 10), dtype=float)
    left, right = volume
    lo, hi = left - 1, right + 1
    flat = LatticeState.flat(lo, hi)
    spec = ProcessSpec.monotone(left, right, rate)
    rng = _rng(seed)
    res = simulate_batch(spec, np.zeros((replicas, hi - lo + 1), dtype=np.int64), lo, float(grid[-1]), rng,
                         snapshot_times=[0.0, *grid.tolist()])
    times = res.snapshot_times
    X = np.column_stack([grid, grid ** 2, grid ** 3])
    wvec = np.linalg.solve(X.T @ X, X.T)[0]
    out = {}
    worst = 0.0
    for phi in phis:
        exact = apply_generator(rate, None, phi, flat)
        base = phi(flat)
        vals = np.stack([phi.on(res.snapshots[s], lo) for s in range(1, len(times))], axis=1) - base
        a_r = vals @ wvec
        a, se = float(a_r.mean()), float(a_r.std(ddof=1) / math.sqrt(replicas))
        z_slope = abs(a - exact) / se if se > 0 else (0.0 if a == exact else math.inf)
        lphi = np.stack([apply_generator(rate, None, phi, res.snapshots[s], lo) for s in range(len(times))], axis=1)
        integral = trapezoid(lphi, times, axis=1)
        d = vals[:, -1] - integral
        dm, dse = float(d.mean()), float(d.std(ddof=1) / math.sqrt(replicas))
        z_int = abs(dm) / dse if dse > 0 else 0.0
        worst = max(worst, z_slope, z_int)
        out[phi.name] = {"exact_L_phi": exact, "slope": a, "slope_se": se, "slope_ci": [a - 1.96 * se, a + 1.96 * se],
                         "z_slope": z_slope, "integrated_gap": dm, "integrated_se": dse, "z_integrated": z_int}
    return CheckResult("forward", worst, z_crit, "<=", _verdict(worst <= z_crit), replicas, [seed],
                       time.perf_counter() - t0, {"functions": out, "t_grid": grid.tolist(), "volume": list(volume)})


def time_integral(traj, phi: CylinderFunction, edges: Sequence[float]) -> np.ndarray:
    """Exact ``int phi(omega(s)) ds`` over consecutive intervals of ``edges``."""
    state = traj.initial.copy()
    lo = state.lo
    om = state.omega
    edges = list(edges)
    out = np.zeros(len(edges) - 1)
    cur = float(phi.on(om, lo))
    t_prev = edges[0]
    b = 0
    events = [e for e in traj.events if edges[0] < e[0] <= edges[-1]]
    for t, i, _d in events + [(edges[-1], None, None)]:
        while b < len(out) and edges[b + 1] <= t:
            out[b] += cur * (edges[b + 1] - t_prev)
            t_prev = edges[b + 1]
            b += 1
        if b < len(out):
            out[b] += cur * (t - t_prev)
        t_prev = t
        if i is not None:
            k = i - lo
            om[k] -= 1
            om[k + 1] += 1
            cur = float(phi.on(om, lo))
    return out


def ergodic_average_check(rate: RateFunction, theta: float = 0.0, volume=(-3, 3), T: float = 2000.0,
                          phi: CylinderFunction | None = None, batches: int = 20, seed: int = 0,
                          level: float = 0.95) -> CheckResult:
    t0 = time.perf_counter()
    phi = phi or CylinderFunction.indicator(0, 0)
    left, right = volume
    lo, hi = left - 1, right + 1
    om0 = sample_equilibrium(rate, theta, lo, hi, 1, _rng(seed))[0]
    traj = simulate(ProcessSpec.boundary(left, right, theta, rate), LatticeState.from_omega(om0, lo), T,
                    PoissonPlaneSet(derive_seed(seed, 1)))
    edges = np.linspace(0.0, T, batches + 1)
    means = time_integral(traj, phi, edges) / (T / batches)
    avg = float(means.mean())
    se = float(means.std(ddof=1) / math.sqrt(batches))
    half = float(stats.t.ppf(0.5 + level / 2, batches - 1) * se)
    target = equilibrium_expectation(rate, theta, phi)
    gap = abs(avg - target)
    return CheckResult("ergodic", gap, half, "<=", _verdict(gap <= half), 1, [seed], time.perf_counter() - t0,
                       {"time_average": avg, "expected": target, "batch_means": means.tolist(),
                        "ci": [avg - half, avg + half], "events": len(traj.events), "T": T})


def cesaro_slope(omega: np.ndarray, lo: int, n: int) -> float:
    """``(1/n) sum_{j=-n}^{n} |omega_j|``."""
    return float(np.abs(omega[-n - lo:n - lo + 1]).sum() / n)


def slope_bound_check(trajectory, n_grid: Sequence[int], alpha: float = 0.01, seed: int = 0) -> CheckResult:
    """Largest window Cesaro slope over the snapshots of a trajectory, with a
    Mann-Kendall test for an upward trend."""
    t0 = time.perf_counter()
    snaps = [trajectory.initial] + list(trajectory.snapshots)
    series = np.array([max(cesaro_slope(s.omega, s.lo, n) for n in n_grid) for s in snaps])
    times = np.array([s.time for s in snaps])
    if np.all(series == series[0]):
        p = 1.0
        tau = 0.0
    else:
        kt = stats.kendalltau(times, series, alternative="greater")
        p, tau = float(kt.pvalue), float(kt.statistic)
    return CheckResult("slope", p, alpha, ">", _verdict(p > alpha), 1, [seed], time.perf_counter() - t0,
                       {"running_max": float(series.max()), "initial": float(series[0]), "tau": tau,
                        "series": series.tolist(), "times": times.tolist()})


def slope_suite(rate: RateFunction, T: float = 20.0, extent: int = 64, n_grid=(8, 16, 32),
                snapshots: int = 41, seed: int = 0, alpha: float = 0.01) -> CheckResult:
    """Cesaro slopes of a large monotone volume run from the flat state."""
    t0 = time.perf_counter()
    init = LatticeState.flat(-extent - 1, extent + 1)
    traj = simulate(ProcessSpec.monotone(-extent, extent, rate), init, T, PoissonPlaneSet(derive_seed(seed, 0)),
                    snapshot_times=np.linspace(0, T, snapshots)[1:].tolist())
    res = slope_bound_check(traj, n_grid, alpha, seed)
    res.runtime = time.perf_counter() - t0
    return res


SUITES = {
    "equilibrium": equilibrium_check,
    "domination": domination_check,
    "generator": generator_check,
    "ctmc": ctmc_check,
    "attractivity": attractivity_check,
    "sandwich": sandwich_check,
    "window": window_check,
    "annihilation": annihilation_check,
    "stationarity": stationarity_test,
    "growth": growth_bound_check,
    "block_growth": block_growth_decay,
    "forward": forward_equation_check,
    "ergodic": ergodic_average_check,
    "slope": slope_suite,
}
