"""Initial fields built from the [initial_data] section of a run config."""

import logging

import numpy as np

from .dynamics import EquationSpec, line_soliton
from .errors import ConfigError
from .integrator import load_checkpoint
from .probes.report import trial_rng
from .runconfig import FileData, GaussianData, InitialData, RandomData, SolitonData
from .spectral import Grid2D, SpectralField2D, forward_transform, random_field

logger = logging.getLogger(__name__)


def gaussian_field(grid: Grid2D, amplitude: float, width: float) -> SpectralField2D:
    """amplitude * exp(-|x - c|^2 / width^2) about the box centre c."""
    x, y = grid.coordinates()
    r2 = (x - grid.L_x / 2) ** 2 + (y - grid.L_y / 2) ** 2
    return forward_transform(amplitude * np.exp(-r2 / width**2), grid)


def build_initial_data(
    data: InitialData, grid: Grid2D, spec: EquationSpec, seed_offset: int = 0
) -> SpectralField2D:
    """
    Evaluate the initial-data section on the run grid.

    Args:
        data: One of the initial-data kinds
        grid: Run grid
        spec: Equation (selects the soliton profile and the dealias degree)
        seed_offset: Added to the random-data seed (the CLI --seed)

    Raises:
        ConfigError: If a checkpoint file does not match the run grid
        DomainError: If the equation has no line soliton
    """
    if isinstance(data, GaussianData):
        return gaussian_field(grid, data.amplitude, data.width)
    if isinstance(data, SolitonData):
        x0 = grid.L_x / 2 if data.x0 is None else data.x0
        return line_soliton(grid, spec, data.K, x0)
    if isinstance(data, RandomData):
        rng = trial_rng(data.seed + seed_offset, 0)
        return random_field(grid, rng, data.taper, data.amplitude, degree=spec.degree)
    if isinstance(data, FileData):
        try:
            field, stored_spec = load_checkpoint(data.path)
        except OSError as e:
            raise ConfigError(f"initial_data.path: cannot read checkpoint: {e}") from e
        if field.grid != grid:
            raise ConfigError(
                f"initial_data.path: checkpoint grid {field.grid.shape} on "
                f"({field.grid.L_x:g}, {field.grid.L_y:g}) does not match the run grid "
                f"{grid.shape} on ({grid.L_x:g}, {grid.L_y:g})"
            )
        if stored_spec != spec:
            logger.warning(f"checkpoint {data.path} was written for {stored_spec}, running {spec}")
        return field.at_time(0.0)
    raise ConfigError(f"initial_data.kind: unsupported data {data!r}")
