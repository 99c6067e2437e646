import numpy as np
import pytest

from nhedge.capacitance import capacitance_sweep
from nhedge.geometry import build_periodic
from nhedge.spectra import alpha_grid


@pytest.fixture(scope="session")
def geom():
    return build_periodic()


@pytest.fixture(scope="session")
def alphas(geom):
    return alpha_grid(geom.period, 128)


@pytest.fixture(scope="session")
def sweep(geom, alphas):
    """Default-order capacitance stack on the standard 128-point grid."""
    return capacitance_sweep(geom, alphas)


@pytest.fixture(scope="session")
def sweep6(geom, alphas):
    return capacitance_sweep(geom, alphas, n_mult=6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if getattr(rep, "when", None) != "call":
                continue
            lines += [v for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
