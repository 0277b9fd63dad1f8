import math

import numpy as np
import pytest

from hybridfwi import kernels
from hybridfwi.forward import SensorArray, SourceSpec
from hybridfwi.grid import MaterialModel, ScalarField, TimeAxis, make_grid

ACCEPTANCE_LINES = {}


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(params=["python", "compiled"])
def each_backend(request):
    if request.param == "compiled" and not kernels.COMPILED_AVAILABLE:
        pytest.skip("compiled kernels not built")
    prev = kernels.backend()
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(prev)


def courant_dt(grid, c0, courant=0.5):
    return courant / (c0 * math.sqrt(sum(1.0 / h**2 for h in grid.spacing)))


@pytest.fixture
def small2d():
    """A 12x9 plate with a random indicator, one source and a few sensors."""
    rng = np.random.default_rng(3)
    grid = make_grid((12, 9), (11e-3, 8e-3))
    mat = MaterialModel()
    time = TimeAxis(courant_dt(grid, mat.c0), 40)
    gamma = ScalarField(grid, 0.3 + 0.7 * rng.random(grid.shape))
    src = SourceSpec((5, 4), amplitude=1.0, frequency=1.0 / (10 * time.dt))
    sensors = SensorArray([(0, 0), (11, 8), (3, 8), (8, 1)])
    return grid, mat, time, gamma, src, sensors
