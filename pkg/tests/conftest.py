import os

import pytest
from hypothesis import HealthCheck, settings

from agmonlab.scenarios import CONSTRUCTORS, solve_scenario

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=15, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Append one 'criterion k: PASS/FAIL ...' line; printed in the terminal summary."""

    def log(label: str, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE_LINES.append(f"{label}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip())
        print(ACCEPTANCE_LINES[-1])
        return passed

    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


_STATES: dict = {}


@pytest.fixture(scope="session")
def solved():
    """Default-grid scenario states, solved once per session."""

    def get(name: str):
        if name not in _STATES:
            _STATES[name] = solve_scenario(CONSTRUCTORS[name]())
        return _STATES[name]

    return get
