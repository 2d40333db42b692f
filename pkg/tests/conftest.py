import math

import pytest

from app.design.likelihood import HypothesisPair
from app.design.testdesign import CostModel
from app.models.distributions import Gaussian, Poisson


@pytest.fixture
def gaussian_pair():
    """Mean of 100 observations, gaussian(0, 36) against gaussian(1.2, 36)."""
    return HypothesisPair(Gaussian(0.0, 36.0), Gaussian(1.2, 36.0), 100)


@pytest.fixture
def poisson_pair():
    return HypothesisPair(Poisson(1.0), Poisson(2.0), 1)


@pytest.fixture
def unit_cost():
    return CostModel(1.0, 1.0)


@pytest.fixture(params=[0, 1, 2, 3], ids=["1", "e", "e^2", "e^3"])
def table_cost(request):
    return CostModel(math.exp(request.param), 1.0)
