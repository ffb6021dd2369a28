import numpy as np
import pytest

from mdlattice.experiments import run_simulation
from mdlattice.grid import make_grid
from mdlattice.initial_data import preset

# smooth packet with nonzero gauge data; fits [-4, 4] up to T = 1
GAUSS = dict(u_amp=1.0, v_amp=0.8, v_center=0.3, width=0.25, momentum=3.0, aplus0=0.5, aminus0=-0.4)
PERTURB = dict(u_amp=0.5, v_amp=-0.7, center=-0.2, v_center=0.1, width=0.3)


@pytest.fixture(scope="session")
def gauss_grid():
    return make_grid(-4.0, 4.0, 2.0 ** -6, 1.0)


@pytest.fixture(scope="session")
def gauss_run(gauss_grid):
    return run_simulation(preset("gaussian_packet", gauss_grid, **GAUSS), gauss_grid, 1.0)


@pytest.fixture(scope="session")
def gauss_run_m0(gauss_grid):
    return run_simulation(preset("gaussian_packet", gauss_grid, **GAUSS), gauss_grid, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# (criterion, passed, detail) rows filled by test_acceptance, echoed after the run
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
