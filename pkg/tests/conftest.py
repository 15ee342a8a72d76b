import numpy as np
import pytest

from specdemux import fixtures
from specdemux.core import DEFAULT_GRID
from specdemux.specgen import SpectraGenConfig, build_dataset, generate_spectra_array


@pytest.fixture(scope="session")
def grid():
    return DEFAULT_GRID


@pytest.fixture(scope="session")
def sensor(grid):
    return fixtures.gaussian_sensor(grid)


@pytest.fixture(scope="session")
def dataset_2000(grid, sensor):
    spectra = generate_spectra_array(SpectraGenConfig(seed=2000, count=2000), grid)
    return build_dataset(spectra, sensor)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(line)
