"""Collects acceptance results and prints one line per criterion at the end of the run."""

from collections import OrderedDict

import pytest

_RESULTS = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(cid, title): acceptance criterion this test belongs to")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            cid, title = mark.args
            _RESULTS.setdefault(cid, {"title": title, "ok": True, "ran": False, "notes": []})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    entry = _RESULTS[mark.args[0]]
    if report.when == "call" or report.failed:
        entry["ran"] = True
        entry["ok"] &= report.passed
    if report.when == "call":
        entry["notes"] += [v for k, v in item.user_properties if k == "note"]


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid, entry in _RESULTS.items():
        status = "PASS" if entry["ran"] and entry["ok"] else "FAIL" if entry["ran"] else "NOT RUN"
        line = f"criterion {cid:<14} {status:<7} {entry['title']}"
        if entry["notes"]:
            line += "  [" + "; ".join(entry["notes"]) + "]"
        tr.write_line(line)
