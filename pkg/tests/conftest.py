# tests/conftest.py
# Shared fixtures and the opt-in marker for the long-running experiment tests.

from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="Run the multi-minute training and fitting experiments.")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-minute experiment, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def ptb_dir():
    return FIXTURES / "ptb_toy"


@pytest.fixture(scope="session")
def char_dir():
    return FIXTURES / "char_toy"
