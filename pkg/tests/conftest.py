"""Shared pytest configuration: a per-criterion verdict summary for the acceptance suite."""

from __future__ import annotations

import pytest

ACCEPTANCE_LINES: dict = {}


def record(criterion: int, passed: bool, detail: str) -> str:
    line = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)
    return line


@pytest.fixture
def verdict():
    """Record one acceptance criterion's outcome, then assert it."""

    def _verdict(criterion: int, passed: bool, detail: str) -> None:
        line = record(criterion, passed, detail)
        assert passed, line

    return _verdict


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    n = marker.args[0]
    if report.failed and (n not in ACCEPTANCE_LINES or " PASS " in ACCEPTANCE_LINES[n]):
        record(n, False, f"{call.excinfo.typename}: {call.excinfo.value}".splitlines()[0])
