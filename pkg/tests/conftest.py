"""
Shared fixtures for the nirenberg-s3 tests.

Expensive acceptance runs are marked @pytest.mark.slow and only run with
--runslow.
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from nirenberg_s3.core.polynomial import AmbientPolynomial  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance test (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def K_axis():
    """K = x4 + 2: critical points +-e4, K^- = {e4}."""
    return AmbientPolynomial.from_expression("x4 + 2")


@pytest.fixture
def K_const():
    return AmbientPolynomial.constant(1.0)


@pytest.fixture
def K_quadratic():
    """3 + sum lambda_i x_i^2 with distinct lambdas: eight Morse critical points +-e_i."""
    return AmbientPolynomial.quadratic_form(3.0, [0.1, 0.2, 0.4, 0.8])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
