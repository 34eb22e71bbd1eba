import pytest
from hypothesis import HealthCheck, settings

from shuttlesim.fixtures import corridor_fixture, grid_fixture, single_lane_corridor

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def corridor():
    return corridor_fixture()


@pytest.fixture(scope="session")
def single_lane():
    return single_lane_corridor()


@pytest.fixture(scope="session")
def grid():
    return grid_fixture()


# -- acceptance summary -------------------------------------------------------------
# Tests marked ``criterion(n)`` contribute to one pass/fail line per criterion,
# printed at the end of the run.

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion the test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    n, title = mark.args
    entry = _CRITERIA.setdefault(n, {"title": title, "failed": [], "ran": 0})
    if rep.when == "call":
        entry["ran"] += 1
    if rep.failed:
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        ok = e["ran"] > 0 and not e["failed"]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {e['title']}"
        if e["failed"]:
            line += f"  (failed: {', '.join(e['failed'])})"
        terminalreporter.write_line(line)
