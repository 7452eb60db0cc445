import warnings

import numpy as np
import pytest

from piezotitop.errors import PiezoParameterWarning
from piezotitop.fe_piezo_beam import BeamSection, PiezoSection, assemble

# criterion lines collected by the acceptance suite
ACCEPTANCE_LINES = []


def preset_beam(n_elements=3, length=0.5):
    return BeamSection(length, n_elements, 9.53e-3, 30e-3, 2600.0, 60e9)


def preset_piezo(**kw):
    return PiezoSection(2e-3, 30e-3, 7600.0, 50e9, -150e-12, 1.59e-12, **kw)


def quiet_assemble(*args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PiezoParameterWarning)
        return assemble(*args, **kwargs)


@pytest.fixture
def beam():
    return preset_beam()


@pytest.fixture
def piezo():
    return preset_piezo()


@pytest.fixture
def model(beam, piezo):
    return quiet_assemble(beam, piezo)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
