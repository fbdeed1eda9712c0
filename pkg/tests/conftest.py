import math

import pytest

from ringcav.cavity import CavityGeometry, tune_cavity
from ringcav.config import load_fixture
from ringcav.dispersion import HELIUM_LINE_OMEGA, GainDoublet

TWO_PI = 2.0 * math.pi

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion(request):
    """Log one PASS/FAIL line for an acceptance criterion; returns the verdict."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {label}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


@pytest.fixture(scope="session")
def vacuum_config():
    return load_fixture("vacuum")


@pytest.fixture(scope="session")
def doublet_config():
    return load_fixture("fig3")


@pytest.fixture(scope="session")
def eit_config():
    return load_fixture("eit")


def doublet_cavity(separation_hz=1.5e6, fwhm_hz=0.8e6, peak_gain=0.28, R=math.sqrt(0.71),
                   L_vac=2.35, L_cell=0.1, absorbing=False, tune=True):
    model = GainDoublet(HELIUM_LINE_OMEGA, TWO_PI * separation_hz, TWO_PI * fwhm_hz, peak_gain, L_cell,
                        absorbing=absorbing)
    geom = CavityGeometry(R, 1.0 - R, L_vac, L_cell, 1.225)
    return (tune_cavity(geom, model) if tune else geom), model


@pytest.fixture(scope="session")
def make_doublet():
    """Factory for a tuned cavity around a gain (or absorbing) doublet; defaults reproduce the gain-doublet fixture."""
    return doublet_cavity
