import pytest
from hypothesis import HealthCheck, settings

from bricklayers.rates import ExponentialBricklayers, ZeroRangeBounded

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def bricks():
    return ExponentialBricklayers(1.0)


@pytest.fixture
def zr():
    return ZeroRangeBounded(1.0)


@pytest.fixture(params=["bricklayers", "zero_range"])
def any_rate(request):
    return ExponentialBricklayers(1.0) if request.param == "bricklayers" else ZeroRangeBounded(1.0)
