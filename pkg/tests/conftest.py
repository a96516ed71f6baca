import pytest

CRITERIA = {
    1: "ABL determinism",
    2: "ABL to Born reduction",
    3: "ensemble recovery",
    4: "single-measurement selection",
    5: "sequential-measurement windows",
    6: "signaling demo",
    7: "robustness ratio oracle",
    8: "exponential scaling",
    9: "weak-value checks",
    10: "global unitarity and reversibility",
    11: "determinism",
}

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _results.setdefault(n, []).append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n, name in CRITERIA.items():
        runs = _results.get(n)
        if runs is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(runs) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} {name}: {status}")
