"""Shared fixtures: hypothesis profile and the session-wide reference context."""
from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from blowup_lab.acceptance import ReferenceContext
from blowup_lab.nonlinearity import catalogue

settings.register_profile(
    "blowup-lab",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("blowup-lab")


@pytest.fixture(scope="session")
def reference():
    """Reference runs and frame series, built once per test session."""
    return ReferenceContext()


@pytest.fixture(scope="session")
def specs():
    return catalogue(2.0)


def pytest_collection_modifyitems(items):
    # The acceptance suite reuses reference runs built by other tests, so it runs last.
    items.sort(key=lambda it: "test_acceptance" in it.nodeid)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICT_LINES

    if VERDICT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in VERDICT_LINES:
            terminalreporter.write_line(line)
