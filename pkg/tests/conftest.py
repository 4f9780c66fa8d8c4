"""Shared fixtures: seeded operators at the acceptance sizes."""

import pytest

from config.settings import ToleranceConfig
from modules.lattice import new_operator, random_operator

ACCEPTANCE_GENERA = [1, 2, 3, 5, 10]


@pytest.fixture
def tol():
    return ToleranceConfig()


@pytest.fixture
def constant_lattice():
    """c = (1, 1, 1): Delta = lambda**3 - 3 lambda, double branch point at -1."""
    return new_operator([1.0, 1.0, 1.0])


@pytest.fixture
def small_op():
    return random_operator(2, seed=7)


@pytest.fixture
def op_t7():
    return random_operator(3, seed=11)


@pytest.fixture(params=ACCEPTANCE_GENERA, ids=lambda n: f"N{n}")
def acceptance_op(request):
    return random_operator(request.param, seed=100 + request.param)
