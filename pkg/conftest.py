import numpy as np
import pytest

from src.config import settings


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-minute training experiments (set NBNET_RUN_SLOW=1)")


def pytest_collection_modifyitems(config, items):
    if settings.RUN_SLOW:
        return
    skip = pytest.mark.skip(reason="slow experiment; set NBNET_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    from src.config.schema import NetworkConfig, SsaConfig

    return NetworkConfig(stages=2, base_channels=8, ssa=SsaConfig(K=4))
