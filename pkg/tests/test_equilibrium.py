import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from bricklayers.equilibrium import (DivergentSeriesError, GoodMeasureSpec, build_marginal, check_domination,
                                     invert_density, mean_density, mean_rates, monotone_coupled_sample,
                                     sample_good_measure, sample_marginal, sample_profile, variance)
from bricklayers.rates import ExponentialBricklayers, ZeroRangeBounded, ZeroRangeLinearCapped


def _z_oracle(rate, theta, width=60):
    """Plain high-precision sum of e^{theta z} / r(|z|)!."""
    with mpmath.workdps(40):
        logf = [mpmath.mpf(0)]
        for n in range(1, width + 1):
            logf.append(logf[-1] + mpmath.log(rate.mp(n)))
        lo = 0 if rate(0) == 0 else -width
        return float(mpmath.fsum(mpmath.exp(theta * z - logf[abs(z)]) for z in range(lo, width + 1)))


def test_normaliser_at_zero(bricks):
    # Poisson summation: sum_z e^{-z^2/2} = sqrt(2 pi) (1 + 2 sum_k e^{-2 pi^2 k^2})
    poisson = math.sqrt(2 * math.pi) * (1 + 2 * sum(math.exp(-2 * math.pi ** 2 * k * k) for k in range(1, 4)))
    assert abs(build_marginal(bricks, 0.0).Z - poisson) < 1e-10
    assert abs(build_marginal(bricks, 0.0).Z - _z_oracle(bricks, 0.0)) < 1e-10


@pytest.mark.parametrize("theta", [-1.0, 0.0, 0.7, 1.0])
def test_mean_rate_identity(bricks, theta):
    right, left = mean_rates(build_marginal(bricks, theta))
    assert abs(right - math.exp(theta)) < 1e-9
    assert abs(left - math.exp(-theta)) < 1e-9


@pytest.mark.parametrize("theta", [-1.0, 0.0, 0.7])
def test_zero_range_mean_rate(zr, theta):
    right, left = mean_rates(build_marginal(zr, theta))
    assert abs(right - math.exp(theta)) < 1e-9
    assert left == 0.0
    assert abs(build_marginal(zr, theta).Z - _z_oracle(zr, theta)) < 1e-10


def test_symmetry_at_zero(bricks):
    m = build_marginal(bricks, 0.0)
    assert np.allclose(m.pmf, m.pmf[::-1], rtol=0, atol=1e-17)
    assert abs(mean_density(m)) < 1e-15
    assert m.prob(0) == pytest.approx(1 / _z_oracle(bricks, 0.0), rel=1e-12)


def test_density_strictly_increasing(bricks):
    grid = np.arange(-3, 3.0001, 0.25)
    d = [mean_density(build_marginal(bricks, t)) for t in grid]
    assert all(b > a for a, b in zip(d, d[1:]))


@given(st.floats(-2.5, 2.5))
def test_invert_density_round_trip(rho):
    r = ExponentialBricklayers(1.0)
    th = invert_density(r, rho)
    assert abs(mean_density(build_marginal(r, th)) - rho) < 1e-6


def test_bounded_zero_range_divergence():
    r = ZeroRangeLinearCapped(cap=2.0)
    with pytest.raises(DivergentSeriesError):
        build_marginal(r, math.log(2.0))
    build_marginal(r, math.log(1.9))


def test_variance_is_derivative_of_density(bricks):
    h = 1e-5
    d = (mean_density(build_marginal(bricks, 0.3 + h)) - mean_density(build_marginal(bricks, 0.3 - h))) / (2 * h)
    assert d == pytest.approx(variance(build_marginal(bricks, 0.3)), rel=1e-6)


@given(st.floats(-2, 2), st.floats(0, 2), st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=50))
def test_common_uniform_domination(theta, gap, us):
    r = ExponentialBricklayers(1.0)
    m1, m2 = build_marginal(r, theta), build_marginal(r, theta + gap)
    check_domination(m1, m2)
    z1, z2 = monotone_coupled_sample(m1, m2, np.array(us))
    assert np.all(z1 <= z2)


def test_sampler_matches_pmf(bricks):
    m = build_marginal(bricks, 0.4)
    u = np.random.default_rng(1).random(200_000)
    s = sample_marginal(m, u)
    sd = math.sqrt(variance(m) / len(u))
    assert abs(s.mean() - mean_density(m)) < 4 * sd


def test_good_measure_sandwich(bricks):
    gm = GoodMeasureSpec.step(bricks, -0.5, 0.5)
    eta, zeta, xi = sample_good_measure(gm, (-6, 6), seed=3)
    assert np.all(eta <= zeta) and np.all(zeta <= xi)
    u = np.random.default_rng(0).random((100, 13))
    z = sample_profile(gm, (-6, 6), u)
    assert z.shape == (100, 13)
    assert np.array_equal(z[:, :7], sample_marginal(gm.upper, u[:, :7]))
    assert np.array_equal(z[:, 7:], sample_marginal(gm.lower, u[:, 7:]))


def test_tail_bound_certified(any_rate):
    m = build_marginal(any_rate, 0.5)
    assert m.tail_bound < 1e-12
    assert abs(m.pmf.sum() - 1) < 1e-12
