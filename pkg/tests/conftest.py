import pytest

from rankone.tower import build_schema

_criteria: dict[str, tuple[str, str, float]] = {}


@pytest.fixture(scope="session")
def schema1():
    return build_schema(1)


@pytest.fixture(scope="session")
def schema2():
    return build_schema(2)


@pytest.fixture(scope="session")
def schema3():
    return build_schema(3)


@pytest.fixture(scope="session")
def stacked2(schema2):
    from oracles import StackedTower

    return StackedTower([st.spacers for st in schema2.stages], top=3)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    name = str(marker.args[0])
    status = "PASS" if report.passed else "FAIL"
    _criteria[name] = (status, item.name, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda s: (len(s), s)):
        status, test, secs = _criteria[name]
        terminalreporter.write_line(f"criterion {name}: {status}  ({test}, {secs:.1f}s)")
