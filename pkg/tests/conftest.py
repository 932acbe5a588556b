from __future__ import annotations

import math

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Filled by tests/test_acceptance.py, printed once at the end of the run.
ACCEPTANCE_RESULTS: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        title, ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key:2d}. {title}: {detail}")


def within_sigma(observed: int, trials: int, p: float, k: float = 3.0) -> bool:
    """True when a binomial count lies within k standard deviations of its mean."""
    sd = math.sqrt(trials * p * (1 - p))
    return abs(observed - trials * p) <= k * sd


@pytest.fixture
def basic_cfg():
    from cvqdc.protocol_engine import preset

    return preset("basic")


@pytest.fixture
def coded_cfg():
    from cvqdc.protocol_engine import preset

    return preset("coded")
