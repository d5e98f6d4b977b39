import sys
from pathlib import Path

import pytest

from usol.parser import parse_program

ROOT = Path(__file__).resolve().parents[1]
PROGRAMS = ROOT / "programs"

sys.path.insert(0, str(Path(__file__).parent))


def load(name: str):
    return parse_program((PROGRAMS / name).read_text())


@pytest.fixture(scope="session")
def paper():
    return load("paper.ccs")


@pytest.fixture(scope="session")
def server():
    return load("server.ccs")


# -- acceptance summary ---------------------------------------------------

_CRITERIA: dict[int, tuple[str, list[bool]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    mark = getattr(report, "criterion", None)
    if mark is None:
        return
    number, title = mark
    _CRITERIA.setdefault(number, (title, []))[1].append(report.passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, results = _CRITERIA[number]
        status = "PASS" if results and all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {title}  ({sum(results)}/{len(results)} checks)")
