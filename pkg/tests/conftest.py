import numpy as np
import pytest

from brokerscale import kernels
from brokerscale.demand_model import CurveSpec, PriceDemandCurve, synthesize_curve
from brokerscale.fleet import BillingConfig

# dollar example: cost 0.132 per 6-slot cycle, nominal 0.03 per slot
EX_TAU = 6
EX_COST = 0.132
EX_GAMMA_STAR = 0.03


@pytest.fixture
def example_curve():
    # g(10, 6) = 0.045 and g(8, 6) = 0.038 by construction
    return PriceDemandCurve((0.03, 0.038, 0.045, 0.06), (1.0, 0.75, 0.6, 0.0), 0.022, 0.1)


@pytest.fixture
def example_billing():
    return BillingConfig(tau=EX_TAU, gamma_star=EX_GAMMA_STAR, cost=EX_COST)


@pytest.fixture(scope="session")
def low_pm_curve():
    return synthesize_curve(CurveSpec(p_m=1 / 12, p_M=0.8, gamma_star=0.3, tau=12, seed=1))


@pytest.fixture
def billing12():
    return BillingConfig(tau=12, gamma_star=0.3)


@pytest.fixture
def linear_curve():
    """One segment from (0.55, 1) to (0.6, 0); marginal revenue spans [0.5, 0.6]."""
    return PriceDemandCurve((0.55, 0.6), (1.0, 0.0), 0.5, 0.6)


@pytest.fixture(params=kernels.available())
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
