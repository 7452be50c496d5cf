import numpy as np
import pytest

from boreg.spectral import Grid, RealField

ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def trig_field(grid: Grid, rng: np.random.Generator, max_mode: int = None) -> RealField:
    """Random real trigonometric polynomial with no Nyquist content."""
    max_mode = max_mode or grid.n // 4
    j = np.arange(1, max_mode + 1)
    k = 2 * np.pi * j / grid.length
    a, b = rng.normal(size=(2, j.size)) / j
    x = grid.x - grid.x_left
    u = rng.normal() + np.cos(np.outer(x, k)) @ a + np.sin(np.outer(x, k)) @ b
    return RealField(grid, u)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid():
    return Grid.centered(256, 20.0)
