import numpy as np
import pytest
from scipy import stats

from bricklayers.batch import simulate_batch
from bricklayers.clocks import PoissonPlaneSet, derive_seed
from bricklayers.dynamics import LatticeState, ProcessSpec, simulate
from bricklayers.verify.oracles import total_variation, transient_law


def test_matches_matrix_exponential(any_rate):
    spec = ProcessSpec.boundary(0, 0, 0.0, any_rate, clamp=3)
    res = simulate_batch(spec, np.zeros((100_000, 3), dtype=np.int64), -1, 0.5, np.random.default_rng(4))
    zs, c = np.unique(res.omega[:, 1], return_counts=True)
    emp = dict(zip(zs.tolist(), (c / c.sum()).tolist()))
    assert total_variation(emp, transient_law(spec, (0,), 0.5).marginal(0)) < 0.01


def test_same_law_as_clock_engine(bricks):
    spec = ProcessSpec.boundary(-1, 1, 0.3, bricks)
    init = LatticeState.from_omega([0, 1, -1, 0, 0], -2)
    n = 4000
    clock = [simulate(spec, init, 0.7, PoissonPlaneSet(derive_seed(6, k))).final.w(0) for k in range(n)]
    batch = simulate_batch(spec, np.tile(init.omega, (n, 1)), -2, 0.7, np.random.default_rng(6)).omega[:, 2]
    vals = sorted(set(clock) | set(batch.tolist()))
    table = np.array([[clock.count(v) for v in vals], [int(np.sum(batch == v)) for v in vals]])
    table = table[:, table.sum(axis=0) >= 10]
    assert stats.chi2_contingency(table).pvalue > 0.01


def test_snapshots_and_growth(bricks):
    spec = ProcessSpec.monotone(-2, 2, bricks)
    om0 = np.zeros((500, 7), dtype=np.int64)
    res = simulate_batch(spec, om0, -3, 1.0, np.random.default_rng(0), snapshot_times=[0.0, 0.5, 1.0])
    assert np.array_equal(res.snapshots[0], om0)
    assert np.array_equal(res.snapshots[-1], res.omega)
    assert np.all(res.snapshot_growth[1] <= res.snapshot_growth[2])
    # mass moves only through the frozen edges
    assert np.all(res.omega.sum(axis=1) == 0)
    # every brick changes two increments; growth reproduces the final state
    rebuilt = om0.copy()
    for k, c in enumerate(res.columns):
        rebuilt[:, c + 3] -= res.growth[:, k]
        rebuilt[:, c + 4] += res.growth[:, k]
    assert np.array_equal(rebuilt, res.omega)


def test_reproducible(bricks):
    spec = ProcessSpec.boundary(-2, 2, 0.0, bricks)
    om0 = np.zeros((50, 7), dtype=np.int64)
    a = simulate_batch(spec, om0, -3, 2.0, np.random.default_rng(1))
    b = simulate_batch(spec, om0, -3, 2.0, np.random.default_rng(1))
    assert np.array_equal(a.omega, b.omega) and np.array_equal(a.events, b.events)


def test_window_checked(bricks):
    with pytest.raises(ValueError):
        simulate_batch(ProcessSpec.monotone(-2, 2, bricks), np.zeros((1, 3)), -1, 1.0, np.random.default_rng())
