"""
Shared fixtures for the DnIRB test suite.

Slow tests (timing orderings, desk-scale training, block sweeps) are skipped
unless pytest runs with --runslow.
"""

import numpy as np
import pytest

from dnirb.data.patches import synthetic_thermal_images
from dnirb.network import NetworkConfig, init_params, zero_params


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run tests marked slow")


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


@pytest.fixture
def one_block_config():
    return NetworkConfig(num_blocks=1)


@pytest.fixture
def one_block_params(one_block_config):
    return init_params(one_block_config, rng_seed=7)


@pytest.fixture
def zero_network(one_block_config):
    return zero_params(one_block_config)


@pytest.fixture(scope="session")
def thermal_images():
    """Four small seeded synthetic scenes (uint8 GrayImage)"""
    return synthetic_thermal_images(4, height=48, width=48, seed=3)
