"""Collects acceptance-criterion outcomes and prints one line per criterion."""

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")
_results: dict[int, tuple[str, str, str]] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    num, title = int(m.group(1)), m.group(2).replace("_", " ")
    verdict = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    note = ""
    for key, value in report.user_properties:
        if key == "soft_verdict":
            verdict = value
        elif key == "detail":
            note = value
    _results[num] = (title, verdict, note)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_results):
        title, verdict, note = _results[num]
        line = f"criterion {num:2d}  {verdict:<12} {title}"
        terminalreporter.write_line(line + (f"  [{note}]" if note else ""))
