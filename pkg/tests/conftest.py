from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from charcomp.coverage import build_coverage_set, example_gateset

settings.register_profile("charcomp", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("charcomp")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def gateset():
    return example_gateset()


@pytest.fixture(scope="session")
def coverage(gateset):
    return build_coverage_set(gateset)


_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def report_line(request):
    """Record a line for the end-of-run acceptance summary."""
    return request.config.stash[_LINES].append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
