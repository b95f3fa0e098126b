"""pytest configuration

Adds --runslow for the acceptance-scale runs marked @pytest.mark.slow and the
fixtures shared across the suite.
"""

import numpy
import pytest

import factories


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="function")
def rng():
    return numpy.random.default_rng(20220601)


@pytest.fixture(scope="function")
def small_game(rng):
    return factories.random_game(rng, 5, 3, mu=0.5, eps=0.1)


@pytest.fixture(scope="function")
def k22():
    return factories.complete_bipartite(2, 2)


@pytest.fixture(scope="function")
def relaxed_config():
    return factories.relaxed_ddbm_config()
