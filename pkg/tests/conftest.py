"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

import re

_RESULTS = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2))
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        _RESULTS[key] = "FAIL" if failed else _RESULTS.get(key, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name), status in sorted(_RESULTS.items()):
        terminalreporter.write_line(f"criterion {num:2d} {name.replace('_', ' ')}: {status}")
