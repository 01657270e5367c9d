import numpy as np
import pytest

from gamowkit import SampledWaveFunction, default_grid

POLE_LOWER = 2 + 0.5j  # pole in the upper half-plane: lower Hardy class


@pytest.fixture(scope="session")
def grid():
    return default_grid()


@pytest.fixture(scope="session")
def bw_lower(grid):
    return SampledWaveFunction.from_function(lambda e: 1.0 / (e - POLE_LOWER), grid)


@pytest.fixture(scope="session")
def bw_upper(grid):
    return SampledWaveFunction.from_function(lambda e: 1.0 / (e - np.conj(POLE_LOWER)), grid)


@pytest.fixture(scope="session")
def gaussian(grid):
    return SampledWaveFunction.from_function(lambda e: np.exp(-e**2), grid)


def random_wavefunction(rng, grid):
    return SampledWaveFunction(grid, rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n))


# acceptance lines, printed once at the end of the run
ACCEPTANCE = {}


def record_acceptance(number, title, passed, detail):
    ACCEPTANCE[number] = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} -- {detail}"
    print(ACCEPTANCE[number])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
