import re

_outcomes = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2))
    if report.failed:
        _outcomes[key] = "FAIL"
    elif report.when == "call" and _outcomes.get(key) != "FAIL":
        _outcomes[key] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for (num, slug), outcome in sorted(_outcomes.items()):
        terminalreporter.write_line(f"criterion {num:2d}: {outcome}  {slug.replace('_', ' ')}")
