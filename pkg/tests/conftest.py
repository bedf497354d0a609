import numpy as np
import pytest

ACCEPTANCE_TITLES = {
    1: "block structure of C_{2,2}",
    2: "block substitution equals recurrence",
    3: "truncation bound suite",
    4: "real-spectrum pipeline end to end",
    5: "complex-spectrum pipeline end to end",
    6: "normal-matrix pipeline end to end",
    7: "leakage closed form and tail bound",
    8: "uniform sampling plan and coverage",
    9: "Kronecker condition-number law",
    10: "sparsity count",
    11: "CLI determinism",
}

_outcomes: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    n = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes[n] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        terminalreporter.write_line(f"criterion {n:2d} [{_outcomes[n]}] {ACCEPTANCE_TITLES[n]}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
