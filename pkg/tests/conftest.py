import numpy as np
import pytest
from hypothesis import settings

from distortion_points import shapes

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def icosphere3():
    return shapes.icosphere(3)


@pytest.fixture(scope="session")
def torus_small():
    return shapes.torus(24, 12)


@pytest.fixture(scope="session")
def cube8():
    return shapes.cube_grid(8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


_criteria: dict = {}


def pytest_runtest_logreport(report):
    mark = getattr(report, "criterion", None)
    if mark is None:
        return
    if report.when == "call" or report.outcome != "passed":
        prev = _criteria.get(mark, ("PASS", 0.0))
        status = "PASS" if report.outcome == "passed" and prev[0] == "PASS" else "FAIL"
        _criteria[mark] = (status, prev[1] + report.duration)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result().criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), (status, seconds) in sorted(_criteria.items()):
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title} ({seconds:.1f} s)")
