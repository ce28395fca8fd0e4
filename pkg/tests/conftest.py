import re

import pytest

_CRITERION = re.compile(r"test_criterion_(\w+?)_")
_outcomes: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: one test per acceptance criterion")


@pytest.hookimpl
def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if m is None:
        return
    key = m.group(1).lstrip("0")
    failed = report.failed or (report.when == "call" and report.outcome != "passed") or hasattr(report, "wasxfail")
    if report.when == "call" or failed:
        if failed:
            _outcomes[key] = "FAIL"
        else:
            _outcomes.setdefault(key, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_outcomes, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
        terminalreporter.write_line(f"{_outcomes[key]}  criterion {key}")
