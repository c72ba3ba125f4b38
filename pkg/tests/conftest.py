import pytest

CRITERIA = {
    1: "affine tightness",
    2: "dominance",
    3: "best-affine closed form",
    4: "Whitney necessity",
    5: "c0 example",
    6: "Wells admissibility",
    7: "path identities",
    8: "projection oracle",
    9: "schedule arithmetic",
    10: "block construction",
    11: "verdict consistency",
    12: "determinism",
}

_results: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _results.setdefault(mark.args[0], []).append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n, name in CRITERIA.items():
        if n not in _results:
            continue
        status = "PASS" if all(_results[n]) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} ({name}): {status}")
