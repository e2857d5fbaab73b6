import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    num, title = mark.args
    prev = _CRITERIA.get(num, (title, "PASS"))[1]
    if rep.when == "call" or rep.failed:
        ok = rep.passed and prev == "PASS"
        _CRITERIA[num] = (title, "PASS" if ok else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, verdict = _CRITERIA[num]
        terminalreporter.write_line(f"{verdict} criterion {num}: {title}")


@pytest.fixture(autouse=True)
def _single_thread():
    from contactlab import parallel

    parallel.set_threads(1)
    yield
    parallel.set_threads(1)
