import math

import pytest

from certmenu.utils import DEFAULT_TOLERANCES
from certmenu.zoo import make_named_instance


@pytest.fixture(scope="session")
def tol():
    return DEFAULT_TOLERANCES


@pytest.fixture(scope="session")
def linear_uniform():
    return make_named_instance("linear_uniform").pricing()


@pytest.fixture(scope="session")
def linear_equal_revenue():
    return make_named_instance("linear_equal_revenue", {"H": 10.0}).pricing()


@pytest.fixture(scope="session")
def gap_e2():
    return make_named_instance("piecewise_gap", {"H": math.e ** 2}).pricing()


@pytest.fixture(scope="session")
def gap_e4():
    return make_named_instance("piecewise_gap", {"H": math.e ** 4}).pricing()


@pytest.fixture(scope="session")
def screening():
    return make_named_instance("quadratic_screening").economy()


@pytest.fixture(scope="session")
def gap_economy():
    return make_named_instance("gap_economy", {"H": math.e ** 2}).economy()
