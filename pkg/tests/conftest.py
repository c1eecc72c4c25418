import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dnls_orbit.lattice import GridSpec, LatticeField, mirror

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def dense_laplacian(grid):
    n, h = grid.npoints, grid.h
    return (np.diag(-2.0 * np.ones(n)) + np.diag(np.ones(n - 1), 1)
            + np.diag(np.ones(n - 1), -1)) / h**2


def random_field(grid, rng, symmetric=False, scale=1.0):
    v = scale * (rng.standard_normal(grid.npoints) + 1j * rng.standard_normal(grid.npoints))
    if symmetric:
        return LatticeField(grid, mirror(v), symmetric=True)
    return LatticeField(grid, v)


def smooth_field(grid, rng, scale=1.0):
    """Random symmetric complex field built from a few low sine modes."""
    x = grid.x
    c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    v = np.exp(-x**2 / 8) * (c[0] + c[1] * np.cos(x / 2) + c[2] * np.cos(x))
    return LatticeField(grid, scale * mirror(v), symmetric=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def e3_grid():
    return GridSpec(0.1875, 80)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion and return the verdict."""
    lines = request.config.stash.setdefault(ACCEPTANCE, {})

    def emit(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[number] = line
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
