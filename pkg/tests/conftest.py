"""Shared test setup and the acceptance summary.

Tests carrying ``@pytest.mark.criterion(n, "name")`` count towards
acceptance criterion ``n``; a criterion passes only if every test tagged
with it passes. Tests may attach a one-line result via
``record_property("detail", ...)``.
"""

import pytest

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, name): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, name = marker.args
        entry = _CRITERIA.setdefault(number, {"name": name, "ok": True, "details": []})
        entry["ok"] = entry["ok"] and report.passed
        entry["details"] += [v for k, v in item.user_properties if k == "detail"]
        if not report.passed:
            entry["details"].append(f"{item.name} failed")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["ok"] else "FAIL"
        detail = "; ".join(entry["details"])
        terminalreporter.write_line(f"[{status}] criterion {number}: {entry['name']}  {detail}")
