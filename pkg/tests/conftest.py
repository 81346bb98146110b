import numpy as np
import pytest

from amscale.placements import PlacementMatrix
from amscale.simharness import SimConfig, generate

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion this test checks")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", m.args[0]))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        prev = _criteria.get(crit, "PASS")
        _criteria[crit] = "PASS" if prev == "PASS" and report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_criteria, key=lambda c: int(c.split()[0][2:])):
        terminalreporter.write_line(f"{_criteria[crit]:4}  {crit}")


@pytest.fixture(scope="session")
def default_sim():
    return generate(SimConfig(seed=2024))


@pytest.fixture(scope="session")
def noiseless_sim():
    return generate(SimConfig(seed=11, sd_min=0.0, sd_max=0.0))


def random_complete(rng, n, J):
    return PlacementMatrix.from_array(rng.normal(size=(n, J)) * rng.uniform(0.5, 3, (n, 1))
                                      + rng.normal(size=(n, 1)))
