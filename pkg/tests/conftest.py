"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

import re

_ACCEPT = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_c(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPT[key] = (report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPT:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for (n, name), (outcome, dur) in sorted(_ACCEPT.items()):
        tag = "PASS" if outcome == "passed" else "FAIL"
        tr.write_line(f"criterion {n:2d} {tag}  {name}  ({dur:.2f} s)")
