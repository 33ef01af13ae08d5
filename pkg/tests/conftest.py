from pathlib import Path

import pytest

from diffiety.dsl import parse, parse_file
from diffiety.jetspace import Truncation, prolong

SYSTEMS = Path(__file__).resolve().parent.parent / "systems"


def load(name: str):
    return parse_file(SYSTEMS / f"{name}.dsl")


@pytest.fixture
def ode_pair():
    return load("ode_pair")


@pytest.fixture
def single_pde():
    return load("single_pde")


@pytest.fixture
def noncontrollable():
    return load("noncontrollable")


@pytest.fixture
def free_jet():
    return parse("independent x\ndependent w\n")


def chart(spec, order=4):
    return prolong(spec, Truncation(order, 2))


# -- acceptance summary: one line per criterion at the end of the run ----------

_CRITERIA: dict = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", m.args[0]))


def pytest_runtest_logreport(report):
    n = dict(report.user_properties).get("criterion")
    if n is None:
        return
    ok, secs = _CRITERIA.get(n, (True, 0.0))
    _CRITERIA[n] = (ok and report.outcome == "passed", secs + report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, secs = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} ({secs:.1f} s)")
