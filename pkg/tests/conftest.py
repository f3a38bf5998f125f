from __future__ import annotations

import warnings

import pytest

from m2cp.chains import StochasticMatrix
from m2cp.io import load_fixture
from m2cp.model import sync_product
from m2cp.trajectory import DistributedSystem

M1_ROWS = (
    ("1/3", "1/3", "1/3", "0"),
    ("1/2", "1/8", "1/8", "1/4"),
    ("1/2", "0", "1/4", "1/4"),
    ("0", "1/2", "1/4", "1/4"),
)


@pytest.fixture(scope="session")
def m1():
    return StochasticMatrix(("a", "b", "c", "d"), M1_ROWS)


@pytest.fixture(scope="session")
def m2():
    # the same chain with private states renamed for site 2
    return StochasticMatrix(("e", "f", "c", "d"), M1_ROWS)


@pytest.fixture(scope="session")
def system():
    return DistributedSystem(("a", "b", "c", "d"), ("c", "d", "e", "f"))


@pytest.fixture(scope="session")
def product(m1, m2):
    return sync_product(m1, m2)


@pytest.fixture(scope="session")
def renormalized(m1, m2):
    return sync_product(m1, m2, "renormalized")


@pytest.fixture(scope="session")
def toy():
    return load_fixture("toy")


@pytest.fixture(scope="session")
def transient():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return load_fixture("transient")


@pytest.fixture(scope="session")
def singleton():
    """Two chains sharing the single state ``c``."""
    a = StochasticMatrix(("a", "b", "c"), (("1/4", "1/4", "1/2"), ("1/3", "1/3", "1/3"), ("1/2", "1/4", "1/4")))
    b = StochasticMatrix(("c", "e"), (("1/3", "2/3"), ("3/4", "1/4")))
    return sync_product(a, b)


# -- acceptance summary ------------------------------------------------------------

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    entry = _CRITERIA.setdefault(marker, {"passed": True, "notes": []})
    if report.when == "call" or report.failed:
        entry["passed"] = entry["passed"] and report.passed
    for name, text in report.user_properties:
        if name == "measured" and text not in entry["notes"]:
            entry["notes"].append(text)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = m.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        notes = "; ".join(e["notes"])
        terminalreporter.write_line(f"criterion {n}: {'PASS' if e['passed'] else 'FAIL'}" + (f" ({notes})" if notes else ""))
