from collections import defaultdict

import pytest

_outcomes = defaultdict(list)
_titles = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            _titles[mark.args[0]] = mark.args[1]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark and (report.when == "call" or report.failed or report.skipped):
        _outcomes[mark.args[0]].append(report.passed if report.when == "call"
                                       else False)


def pytest_terminal_summary(terminalreporter):
    if not _titles:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_titles):
        results = _outcomes.get(number, [])
        ok = bool(results) and all(results)
        terminalreporter.write_line(
            f"{'PASS' if ok else 'FAIL'}  criterion {number}: {_titles[number]}")
