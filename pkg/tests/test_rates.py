import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bricklayers.rates import (ExponentialBricklayers, RateTableError, Regime, TableDefined,
                               ZeroRangeBounded, ZeroRangeLinearCapped, log_factorials, rate_factorial,
                               rate_from_config, validate_rate_function)


def test_exponential_values(bricks):
    assert bricks(1) == pytest.approx(math.exp(0.5))
    assert bricks(0) == pytest.approx(math.exp(-0.5))
    assert bricks(3) == pytest.approx(math.exp(2.5))


@given(st.integers(-40, 40), st.floats(0.1, 3.0))
def test_reciprocity(z, beta):
    r = ExponentialBricklayers(beta)
    assert math.log(r(z)) + math.log(r(1 - z)) == pytest.approx(0.0, abs=1e-12)


@given(st.integers(-30, 30))
def test_zero_range_vanishes_on_nonpositive(z):
    r = ZeroRangeBounded(1.0)
    assert (r(z) == 0.0) == (z <= 0)


@given(st.integers(-30, 29))
def test_monotone(z):
    for r in (ExponentialBricklayers(0.7), ZeroRangeBounded(1.3), ZeroRangeLinearCapped(cap=4)):
        assert r(z + 1) >= r(z)


def test_validation_reports(bricks, zr):
    rep = validate_rate_function(bricks)
    assert rep.usable and rep.strictly_increasing
    assert validate_rate_function(zr).usable
    capped = validate_rate_function(ZeroRangeLinearCapped(cap=3))
    assert capped.usable and not capped.strictly_increasing
    assert "FAIL" not in validate_rate_function(bricks).summary()


def test_table_family_matches_closed_form(bricks):
    tab = TableDefined(values=tuple((z, bricks(z)) for z in range(1, 6)), extrapolation="geometric")
    for z in range(-10, 12):
        assert tab(z) == pytest.approx(bricks(z), rel=1e-12)


def test_table_gap_rejected():
    with pytest.raises(RateTableError) as e:
        TableDefined(values=((1, 1.0), (3, 2.0)))
    assert e.value.index == 2


def test_table_from_file(tmp_path):
    p = tmp_path / "r.txt"
    p.write_text("# z r\n1 1.5\n2 3.0\n3 6.0\n")
    r = rate_from_config({"family": "table", "path": str(p), "regime": "zero_range"})
    assert r.regime is Regime.ZERO_RANGE
    assert r(4) == pytest.approx(12.0)
    assert r(0) == 0.0


@pytest.mark.parametrize("rate", [ExponentialBricklayers(0.8), ZeroRangeBounded(1.2),
                                  ZeroRangeLinearCapped(cap=3, beta_bound=2.0)])
def test_config_round_trip(rate):
    assert rate_from_config(rate.to_config()) == rate


def test_log_factorials(bricks):
    lf = log_factorials(bricks, 6)
    assert lf[0] == 0.0
    for n in range(1, 7):
        assert lf[n] == pytest.approx(sum(n_ - 0.5 for n_ in range(1, n + 1)))
        assert lf[n] == pytest.approx(rate_factorial(bricks, n))


def test_large_factorial_is_finite(bricks):
    lf = log_factorials(bricks, 400)
    assert np.all(np.isfinite(lf))
