import json
import math

import numpy as np
import pytest

from bricklayers.clocks import PoissonPlaneSet
from bricklayers.dynamics import LatticeState, ProcessSpec, simulate
from bricklayers.rates import ExponentialBricklayers
from bricklayers.verify import oracles
from bricklayers.verify.checks import FAIL, INCONCLUSIVE, PASS, CheckResult, summary_table
from bricklayers.verify.generator import CylinderFunction
from bricklayers.verify.suites import (SUITES, block_growth_decay, ctmc_check, ergodic_average_check,
                                       growth_bound_check, slope_bound_check, stationarity_test, time_integral)

BL = ExponentialBricklayers(1.0)


def test_check_result_is_auditable():
    r = CheckResult("x", 0.3, 0.01, ">", PASS, 10, [1], 0.1)
    assert r.rederive() == PASS and r.passed
    bad = CheckResult("x", 0.001, 0.01, ">", FAIL, 10, [1], 0.1)
    assert bad.rederive() == FAIL
    band = CheckResult("x", 2.0, [1.0, 3.0], "in", PASS, 1, [0], 0.0)
    assert band.rederive() == PASS
    doc = json.loads(CheckResult("y", math.nan, 0.0, "<", INCONCLUSIVE, 1, [0], 0.0).to_json())
    assert doc["statistic"] == "nan" and doc["verdict"] == INCONCLUSIVE
    assert "x" in summary_table([r, bad])


def test_oracle_is_a_probability_law():
    spec = ProcessSpec.boundary(0, 0, 0.0, BL, clamp=3)
    states, Q = oracles.generator_matrix(spec)
    assert np.allclose(Q.sum(axis=1), 0)
    law = oracles.transient_law(spec, (0,), 0.5)
    assert law.probs.sum() == pytest.approx(1.0)
    m0 = oracles.transient_law(spec, (0,), 0.0).marginal(0)
    assert m0[0] == pytest.approx(1.0) and sum(m0.values()) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        oracles.generator_matrix(ProcessSpec.boundary(0, 0, 0.0, BL))


def test_ctmc_small():
    r = ctmc_check(BL, replicas=5000, engine="batch")
    assert r.passed and r.rederive() == r.verdict


def test_stationarity_at_time_zero():
    r = stationarity_test(BL, t=0.0, replicas=500)
    assert all(r.details["p_values"][k] == 1.0 for k in r.details["p_values"] if not k.startswith("chi2"))


def test_growth_at_time_zero():
    r = growth_bound_check(BL, t_grid=(0.0,), replicas=200)
    assert r.details["per_t"]["0"]["pooled_mean"] == 0.0


def test_block_growth_inconclusive_for_large_t():
    r = block_growth_decay(BL, t=30.0, i_grid=(-1, -2), replicas=2000, volume=(-3, 1), chunk=1000)
    assert r.verdict == INCONCLUSIVE


def test_exact_time_integral():
    spec = ProcessSpec.boundary(-2, 2, 0.0, BL)
    traj = simulate(spec, LatticeState.flat(-3, 3), 50.0, PoissonPlaneSet(3))
    phi = CylinderFunction.indicator(0, 0)
    parts = time_integral(traj, phi, np.linspace(0, 50, 11))
    # direct sum over holding intervals
    s, t_prev, total = traj.initial.copy(), 0.0, 0.0
    for t, i, _ in traj.events:
        total += phi(s) * (t - t_prev)
        s.omega[i - s.lo] -= 1
        s.omega[i + 1 - s.lo] += 1
        t_prev = t
    total += phi(s) * (50.0 - t_prev)
    assert parts.sum() == pytest.approx(total, abs=1e-9)
    const = time_integral(traj, CylinderFunction.constant(2.5), np.linspace(0, 50, 11))
    assert const.sum() == pytest.approx(125.0, abs=1e-9)


def test_ergodic_constant():
    r = ergodic_average_check(BL, T=50.0, phi=CylinderFunction.constant(0.7))
    assert r.details["time_average"] == pytest.approx(0.7, abs=1e-12)


def test_slope_at_time_zero():
    init = LatticeState.from_omega(np.array([(-1) ** k * (k % 3) for k in range(41)]), -20)
    traj = simulate(ProcessSpec.monotone(-19, 19, BL), init, 0.0, PoissonPlaneSet(0))
    r = slope_bound_check(traj, [4, 8])
    k_init = max(np.abs(init.omega[20 - n:20 + n + 1]).sum() / n for n in (4, 8))
    assert r.details["series"][0] == pytest.approx(k_init)


def test_registry():
    assert {"stationarity", "generator", "ctmc", "window", "annihilation"} <= set(SUITES)
