import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from bricklayers.clocks import PoissonPlaneSet, derive_seed
from bricklayers.coupling import (ConditionalCouplingSetup, CoupledRun, OrderMonitor, annihilation_probability,
                                  clopper_pearson, conditional_coupling, discrepancy, perturb, run_coupled,
                                  second_class_census, wilson_interval)
from bricklayers.dynamics import LatticeState, ProcessSpec, simulate
from bricklayers.equilibrium import build_marginal, sample_marginal
from bricklayers.rates import ExponentialBricklayers, ZeroRangeBounded

BL = ExponentialBricklayers(1.0)
ZR = ZeroRangeBounded(1.0)


def _eq_state(rate, theta, lo, hi, seed):
    u = np.random.default_rng(seed).random(hi - lo + 1)
    return LatticeState.from_omega(sample_marginal(build_marginal(rate, theta), u), lo)


def test_identical_members_never_differ():
    spec = ProcessSpec.boundary(-3, 3, 0.2, BL)
    s = _eq_state(BL, 0.2, -4, 4, 1)
    res = run_coupled(CoupledRun([("a", spec, s), ("b", spec, s.copy())], PoissonPlaneSet(5), [("a", "b")]), 3.0)
    assert res.trajectories["a"].events == res.trajectories["b"].events
    assert all(d == {} for _, d in res.discrepancy[("a", "b")])
    c = second_class_census(res, ("a", "b"), 3.0)
    assert (c.particles, c.antiparticles, c.particle_sites) == (0, 0, ())


def test_marginals_unchanged_by_coupling():
    spec_a = ProcessSpec.monotone(-3, 3, BL)
    spec_b = ProcessSpec.monotone(-5, 5, BL)
    s = LatticeState.flat(-6, 6)
    res = run_coupled(CoupledRun([("a", spec_a, s), ("b", spec_b, s)], PoissonPlaneSet(8)), 2.0)
    alone = simulate(spec_a, s, 2.0, PoissonPlaneSet(8))
    assert res.trajectories["a"].events == alone.events


@pytest.mark.parametrize("rate", [BL, ZR], ids=["bl", "zr"])
@given(seed=st.integers(0, 10 ** 9), data=st.data())
def test_attractivity_and_volume_monotonicity(rate, seed, data):
    L = data.draw(st.integers(-8, -1))
    R = data.draw(st.integers(1, 8))
    l = data.draw(st.integers(L, R - 1))
    r = data.draw(st.integers(l + 1, R))
    lo, hi = L - 1, R + 1
    s = _eq_state(rate, 0.0, lo, hi, seed)
    inner, outer = ProcessSpec.monotone(l, r, rate), ProcessSpec.monotone(L, R, rate)
    left_ext, right_ext = ProcessSpec.monotone(L, r, rate), ProcessSpec.monotone(l, R, rate)
    run = CoupledRun([("in", inner, s), ("out", outer, s), ("le", left_ext, s), ("re", right_ext, s)],
                     PoissonPlaneSet(seed))
    mons = [OrderMonitor("in", "out", "heights"), OrderMonitor("in", "le", "omega", (l, r)),
            OrderMonitor("re", "in", "omega", (l, r))]
    run_coupled(run, 1.5, monitors=mons)
    assert all(m.violations == 0 for m in mons), [(m.lower, m.upper, m.first) for m in mons]


@given(seed=st.integers(0, 10 ** 9), i=st.integers(-3, 2))
def test_single_perturbation_pair(seed, i):
    spec = ProcessSpec.boundary(-4, 4, 0.0, BL)
    s = _eq_state(BL, 0.0, -5, 5, seed)
    z = perturb(s, i)
    c0 = second_class_census(None, ("w", "z"), 0.0, (s, z))
    assert c0.antiparticle_sites == (i,) and c0.particle_sites == (i + 1,)
    res = run_coupled(CoupledRun([("w", spec, s), ("z", spec, z)], PoissonPlaneSet(seed), [("w", "z")]), 2.0)
    totals = [sum(abs(v) for v in d.values()) for _, d in res.discrepancy[("w", "z")]]
    assert all(b <= a for a, b in zip(totals, totals[1:]))
    assert all(abs(v) <= 1 for _, d in res.discrepancy[("w", "z")] for v in d.values())


def test_discrepancy_history_matches_replay():
    spec = ProcessSpec.boundary(-3, 3, 0.0, BL)
    a = _eq_state(BL, 0.0, -4, 4, 3)
    b = _eq_state(BL, 0.0, -4, 4, 4)
    res = run_coupled(CoupledRun([("a", spec, a), ("b", spec, b)], PoissonPlaneSet(1), [("a", "b")]), 1.0)
    for t, d in res.discrepancy[("a", "b")][::7]:
        v = discrepancy(res.trajectories["a"].replay(t), res.trajectories["b"].replay(t))
        assert {k - 4: int(x) for k, x in enumerate(v) if x} == d


def test_rate_table_fidelity():
    """First event of two one-column processes at rates a < b: both jump with
    probability a/b, only the faster one otherwise."""
    spec = ProcessSpec.monotone(0, 1, BL)
    w = LatticeState.from_omega([0, 0, 0, 0], -1)
    z = LatticeState.from_omega([0, 1, 0, 0], -1)
    a, b = 2 * BL(0), BL(1) + BL(0)
    both = only = 0
    for k in range(3000):
        res = run_coupled(CoupledRun([("w", spec, w), ("z", spec, z)], PoissonPlaneSet(derive_seed(12, k))),
                          50.0, stop=lambda t, ms: True, check_discrepancy=False)
        jw, jz = len(res.trajectories["w"].events), len(res.trajectories["z"].events)
        assert jz == 1
        both += jw
        only += 1 - jw
    p = a / b
    assert stats.chisquare([both, only], [3000 * p, 3000 * (1 - p)]).pvalue > 0.01


def test_rejects_unordered_boundary_pair():
    s = LatticeState.flat(-3, 3)
    lo = ProcessSpec.boundary(-2, 2, -0.5, BL)
    hi = ProcessSpec.boundary(-2, 2, 0.5, BL)
    CoupledRun([("a", lo, s), ("b", hi, s)], PoissonPlaneSet(0), [("a", "b")])
    with pytest.raises(ValueError):
        CoupledRun([("a", lo, s), ("b", hi, s)], PoissonPlaneSet(0), [("b", "a")])
    with pytest.raises(ValueError):
        CoupledRun([("a", lo, s), ("b", hi, LatticeState.flat(-4, 4))], PoissonPlaneSet(0))


def test_conditional_coupling_flat_wall():
    w = LatticeState.flat(-7, 7)
    setup = ConditionalCouplingSetup.build(BL, w, -6, 6)
    assert setup.K == 0.0
    res = conditional_coupling(setup, 1.0, seed=3, min_attempts=400)
    assert res.accepted and res.acceptance_ci[0] > 0
    assert res.monitor.violations == 0
    assert setup.accepts(res.zeta)


def test_conditional_coupling_rejects_steep_wall():
    w = LatticeState.from_omega([3] * 15, -7)
    with pytest.raises(ValueError):
        ConditionalCouplingSetup(BL, w, -6, 6, -0.1, 0.1, 3.0)


def test_annihilation_zero_at_start_and_monotone():
    est = annihilation_probability(BL, 0.0, 0, [1e-9, 0.3, 1.0], 300, seed=2, volume=(-4, 4))
    assert est.counts[0] == 0
    assert est.counts == sorted(est.counts)


def test_intervals():
    lo, hi = wilson_interval(30, 100)
    assert lo < 0.3 < hi
    lo2, hi2 = clopper_pearson(30, 100)
    assert lo2 < 0.3 < hi2
    assert clopper_pearson(0, 50)[0] == 0.0
