"""Shared fixtures: small grids, seeded generators and isolated settings."""

import math

import numpy as np
import pytest

from gzk_lab.config import settings
from gzk_lab.spectral import Grid2D, SpectralField2D, random_field


@pytest.fixture(autouse=True)
def _no_log_files(monkeypatch):
    """Keep test runs from writing logs/ into the working tree."""
    monkeypatch.setattr(settings, "log_to_file", False)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def grid16() -> Grid2D:
    """16 x 16 modes on a 2pi box, so d_xi = d_eta = 1."""
    return Grid2D.create(16, L_x=2 * math.pi)


@pytest.fixture
def grid32() -> Grid2D:
    return Grid2D.create(32, L_x=8 * math.pi)


@pytest.fixture
def smooth_field(grid32, rng) -> SpectralField2D:
    """Nyquist-free random field dealiased for quadratic products."""
    return random_field(grid32, rng, taper=3.0, amplitude=0.5, degree=2)
