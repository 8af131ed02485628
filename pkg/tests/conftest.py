"""Shared pytest hooks: one PASS/FAIL line per acceptance criterion."""

from collections import defaultdict

import pytest

_TITLES: dict[int, str] = {}
_OUTCOMES: dict[int, list[bool]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            _TITLES[mark.args[0]] = mark.args[1]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    # the call phase decides; a setup error or skip also counts as not met
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        met = rep.passed and not hasattr(rep, "wasxfail")
        _OUTCOMES[mark.args[0]].append(met)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_TITLES):
        results = _OUTCOMES.get(num)
        if not results:
            continue
        status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {status} {_TITLES[num]}")
