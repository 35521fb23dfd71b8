import sys

import numpy as np
import pytest

from dollyshot.rewards import RewardWeights
from dollyshot.sim import EpisodeConfig


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance criterion lines past output capture."""
    module = sys.modules.get("test_acceptance") or sys.modules.get(
        "tests.test_acceptance"
    )
    lines = getattr(module, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def base_env():
    return EpisodeConfig(task="base", start_position="P3")


@pytest.fixture
def full_env():
    return EpisodeConfig(task="full", start_position="P3")


@pytest.fixture
def weights():
    return RewardWeights()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
