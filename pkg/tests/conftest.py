import os
import sys

import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "heavy: long-running reproduction (deselect with -m 'not heavy')")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def artifact_dir():
    """Cache directory for long computations; reused across runs."""
    d = os.environ.get("HCOCYCLE_CACHE") or os.path.join(os.path.dirname(__file__), ".cache")
    os.makedirs(d, exist_ok=True)
    return d


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
