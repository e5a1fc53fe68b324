import numpy as np
import pytest

from oldroyd.fourier_field import Grid, SpectralField, fft

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(grid: Grid, rank: str, rng, smooth: float = None, band: bool = True):
    """Real random field; optional Gaussian spectral taper and 2/3 truncation."""
    values = rng.standard_normal((grid.ncomp(rank),) + grid.shape)
    c = fft(values, grid)
    if smooth:
        c = c * np.exp(-grid.k2 / smooth)
    if band:
        c = c * grid.dealias_mask
    return SpectralField(grid, rank, c)
