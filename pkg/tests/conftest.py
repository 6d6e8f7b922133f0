import math

import numpy as np
import pytest

from apskga.constellation import LAYOUT_16, Constellation, RingLayout


def circular_same_set(a, b, tol=1e-9):
    """True if the two phase multisets coincide modulo 2*pi."""
    a = np.mod(np.asarray(a, float), 2 * math.pi)
    b = list(np.mod(np.asarray(b, float), 2 * math.pi))
    for x in a:
        d = [min(abs(x - y), 2 * math.pi - abs(x - y)) for y in b]
        k = int(np.argmin(d))
        if d[k] > tol:
            return False
        b.pop(k)
    return not b


@pytest.fixture
def antipodal():
    """Two points at +-1 on one ring, labels 0 and 1."""
    return Constellation(ring=[0, 0], radius=[1.0, 1.0], phase=[0.0, math.pi], value=[0, 1],
                         layout=RingLayout((2,)))


@pytest.fixture
def layout16():
    return LAYOUT_16


_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    mark = getattr(report, "criterion", None)
    if mark is None:
        return
    n, text = mark
    failed = report.failed or (report.when == "call" and report.skipped)
    if failed or n not in _CRITERIA:
        _CRITERIA[n] = ("FAIL" if failed else "PASS", text)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = tuple(mark.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, text = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {text}")
