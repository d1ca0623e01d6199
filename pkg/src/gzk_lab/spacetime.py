"""Space-time lattices over (xi, eta, tau): X^{sigma,s,b} norms, Q_L projections and products."""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy import fft as sfft
from scipy import signal

from .config import settings
from .errors import ConfigError, MemoryGuardError, RangeGuardError
from .spectral import EXP_GUARD, Grid2D, ProjectionSpec, SpectralField2D
from .window import DEFAULT_WINDOW, WindowFn, dyadic_bump, dyadic_levels, window_psi

logger = logging.getLogger(__name__)

DEFAULT_T_WINDOW = 4.0


class BourgainParams(BaseModel):
    """Weights e^{sigma|gamma|_1} <gamma>^s <tau - xi^3 - eta^3>^b."""

    model_config = ConfigDict(frozen=True)

    sigma: float = 0.0
    s: float = 0.0
    b: float = 0.5
    eps: Optional[float] = None

    @field_validator("sigma")
    @classmethod
    def _sigma_nonnegative(cls, v: float) -> float:
        if v < 0:
            raise ValueError(f"sigma must be >= 0, got {v}")
        return v

    @model_validator(mode="after")
    def _b_in_range(self) -> "BourgainParams":
        if not -1.0 < self.b < 1.0:
            raise ValueError(f"b must lie in (-1, 1), got {self.b}")
        return self


@dataclass(frozen=True)
class SpaceTimeField:
    """
    Coefficients over a (xi, eta, tau) lattice in centred ordering.

    offsets give the array index of the zero mode per axis; the lattice extent is
    free, so products of fields live on larger lattices of the same spacings.
    """

    grid: Grid2D
    T_window: float
    coeffs: np.ndarray
    offsets: Tuple[int, int, int] = (-1, -1, -1)

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.ndim != 3:
            raise ConfigError(f"space-time coefficients must be 3D, got shape {coeffs.shape}")
        if self.T_window <= 0:
            raise ConfigError(f"T_window must be positive, got {self.T_window}")
        offsets = tuple(
            n // 2 if o < 0 else int(o) for n, o in zip(coeffs.shape, self.offsets)
        )
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "offsets", offsets)

    @property
    def n_t(self) -> int:
        return self.coeffs.shape[2]

    @property
    def d_tau(self) -> float:
        return 2.0 * math.pi / self.T_window

    @property
    def volume(self) -> float:
        """Plancherel weight of one lattice point."""
        return self.grid.d_xi * self.grid.d_eta * self.d_tau

    def with_coeffs(self, coeffs: np.ndarray) -> "SpaceTimeField":
        return dataclasses.replace(self, coeffs=coeffs)

    def axes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Signed frequencies along xi, eta, tau."""
        nx, ny, nt = self.coeffs.shape
        ox, oy, ot = self.offsets
        return (
            (np.arange(nx) - ox) * self.grid.d_xi,
            (np.arange(ny) - oy) * self.grid.d_eta,
            (np.arange(nt) - ot) * self.d_tau,
        )

    def signed_axes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Signed frequencies for odd symbols.

        On a centred lattice of the grid's own mode count the unpaired Nyquist index
        carries signed frequency 0, as in WaveVector; product lattices have no such index.
        """
        xi, eta, tau = self.axes()
        for axis, n_grid, offset in (
            (xi, self.grid.n_x, self.offsets[0]),
            (eta, self.grid.n_y, self.offsets[1]),
        ):
            if axis.size == n_grid and n_grid % 2 == 0 and offset == n_grid // 2:
                axis[0] = 0.0
        return xi, eta, tau

    def spatial_l1(self) -> np.ndarray:
        xi, eta, _ = self.axes()
        return np.abs(xi)[:, None] + np.abs(eta)[None, :]

    def spatial_bracket(self) -> np.ndarray:
        xi, eta, _ = self.axes()
        return np.sqrt(1.0 + xi[:, None] ** 2 + eta[None, :] ** 2)

    def modulation(self) -> np.ndarray:
        """tau - xi^3 - eta^3 on the full lattice."""
        xi, eta, tau = self.signed_axes()
        return tau[None, None, :] - (xi[:, None] ** 3 + eta[None, :] ** 3)[:, :, None]

    def check_compatible(self, other: "SpaceTimeField") -> None:
        if (self.grid.L_x, self.grid.L_y, self.T_window) != (
            other.grid.L_x,
            other.grid.L_y,
            other.T_window,
        ):
            raise ConfigError("space-time fields live on different boxes or time windows")


def convolution_scale(u: SpaceTimeField) -> float:
    """(2pi)^{-3/2} d_xi d_eta d_tau, the unitary 3D convolution weight."""
    return (2.0 * math.pi) ** -1.5 * u.volume


def check_lattice_size(shape: Sequence[int]) -> None:
    size = int(np.prod(shape))
    if size > settings.max_probe_lattice:
        raise MemoryGuardError(
            f"space-time lattice {tuple(shape)} has {size} entries, above the limit "
            f"{settings.max_probe_lattice} (GZK_MAX_PROBE_LATTICE)"
        )


def space_time_product(*fields: SpaceTimeField) -> SpaceTimeField:
    """Coefficients of the pointwise product, by full linear convolution on the lattice."""
    if not fields:
        raise ConfigError("space_time_product needs at least one field")
    result = fields[0]
    for other in fields[1:]:
        result.check_compatible(other)
        shape = [a + b - 1 for a, b in zip(result.coeffs.shape, other.coeffs.shape)]
        check_lattice_size(shape)
        coeffs = signal.fftconvolve(result.coeffs, other.coeffs, mode="full")
        result = SpaceTimeField(
            grid=result.grid,
            T_window=result.T_window,
            coeffs=coeffs * convolution_scale(result),
            offsets=tuple(a + b for a, b in zip(result.offsets, other.offsets)),
        )
    return result


def l2_norm(F: SpaceTimeField) -> float:
    """Space-time L^2 norm via Plancherel."""
    return float(np.sqrt(np.sum(np.abs(F.coeffs) ** 2) * F.volume))


def xsb_weight(F: SpaceTimeField, p: BourgainParams) -> np.ndarray:
    """
    Raises:
        RangeGuardError: If sigma*max|gamma|_1 exceeds the exp guard
    """
    l1 = F.spatial_l1()
    if p.sigma * float(l1.max()) > EXP_GUARD:
        raise RangeGuardError(
            f"sigma={p.sigma} overflows exp on a lattice with max |gamma|_1={l1.max():.3g}"
        )
    spatial = np.exp(p.sigma * l1) * F.spatial_bracket() ** p.s
    return spatial[:, :, None] * np.sqrt(1.0 + F.modulation() ** 2) ** p.b


def xsb_norm(F: SpaceTimeField, p: BourgainParams) -> float:
    """||e^{sigma|gamma|} <gamma>^s <tau - xi^3 - eta^3>^b u^||_{L^2} on the lattice."""
    weighted = xsb_weight(F, p) * np.abs(F.coeffs)
    return float(np.sqrt(np.sum(weighted**2) * F.volume))


def project_QL(F: SpaceTimeField, spec: ProjectionSpec) -> SpaceTimeField:
    """Multiply by psi_L(tau - xi^3 - eta^3)."""
    return F.with_coeffs(F.coeffs * dyadic_bump(F.modulation(), spec.L))


def project_PN_spacetime(F: SpaceTimeField, spec: ProjectionSpec) -> SpaceTimeField:
    """Multiply by psi_N(||gamma||), constant in tau."""
    xi, eta, _ = F.axes()
    norm = np.hypot(xi[:, None], eta[None, :])
    return F.with_coeffs(F.coeffs * dyadic_bump(norm, spec.N)[:, :, None])


def xsb_dyadic_norm(F: SpaceTimeField, s: float, b: float) -> float:
    """Littlewood-Paley form (sum_{N,L} N^{2s} L^{2b} ||Q_L P_N u||^2)^{1/2}."""
    xi, eta, _ = F.axes()
    max_norm = float(np.hypot(np.abs(xi).max(), np.abs(eta).max()))
    max_mod = float(np.abs(F.modulation()).max())
    total = 0.0
    for N in dyadic_levels(max_norm):
        piece = project_PN_spacetime(F, ProjectionSpec(N=N))
        for L in dyadic_levels(max_mod):
            block = l2_norm(project_QL(piece, ProjectionSpec(L=L)))
            total += N ** (2 * s) * L ** (2 * b) * block**2
    return math.sqrt(total)


def hermitian_symmetrize(coeffs: np.ndarray, offsets: Sequence[int]) -> np.ndarray:
    """(c(m) + conj(c(-m)))/2 jointly in all axes; unpaired edge planes are zeroed."""
    out = np.array(coeffs, dtype=complex)
    index = []
    unpaired = []
    for n, off in zip(out.shape, offsets):
        reflected = 2 * off - np.arange(n)
        unpaired.append(np.nonzero((reflected < 0) | (reflected >= n))[0])
        index.append(np.clip(reflected, 0, n - 1))
    result = 0.5 * (out + np.conj(out[np.ix_(*index)]))
    for axis, planes in enumerate(unpaired):
        sl: list = [slice(None)] * out.ndim
        sl[axis] = planes
        result[tuple(sl)] = 0.0
    return result


def space_time_random(
    grid: Grid2D,
    shape: Tuple[int, int, int],
    T_window: float,
    rng: np.random.Generator,
    taper: float = 2.0,
) -> SpaceTimeField:
    """Complex Gaussian lattice tapered by <gamma>^{-taper}, Hermitian-symmetrized."""
    check_lattice_size(shape)
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    field = SpaceTimeField(grid=grid, T_window=T_window, coeffs=raw)
    raw = raw * field.spatial_bracket()[:, :, None] ** (-taper)
    return field.with_coeffs(hermitian_symmetrize(raw, field.offsets))


def time_samples(n_t: int, T_window: float) -> np.ndarray:
    """t_j = -T/2 + j T/n_t, j = 0..n_t-1."""
    return -0.5 * T_window + np.arange(n_t) * (T_window / n_t)


def space_time_from_free(
    u0: SpectralField2D,
    n_t: int,
    T_window: float = DEFAULT_T_WINDOW,
    window: WindowFn = DEFAULT_WINDOW,
) -> SpaceTimeField:
    """
    psi(t) W(t) u0 sampled on the time window and transformed in t.

    Args:
        u0: Initial data
        n_t: Number of time samples (resolve max|xi^3 + eta^3| to avoid wrap-around)
        T_window: Window length; 4 fits the support [-2, 2] of psi exactly
        window: Cut-off psi

    Returns:
        SpaceTimeField on the (n_x, n_y, n_t) lattice of u0's grid
    """
    grid = u0.grid
    check_lattice_size((grid.n_x, grid.n_y, n_t))
    t = time_samples(n_t, T_window)
    omega = grid.wave_vector().dispersion
    history = (
        window_psi(t, window)[None, None, :]
        * np.exp(1j * omega[:, :, None] * t[None, None, :])
        * u0.coeffs[:, :, None]
    )
    dt = T_window / n_t
    spectrum = sfft.fft(history, axis=2) * (dt / math.sqrt(2.0 * math.pi))
    tau = (sfft.fftfreq(n_t, dt) * 2.0 * math.pi)[None, None, :]
    spectrum *= np.exp(-1j * tau * t[0])
    centred = sfft.fftshift(spectrum, axes=(0, 1, 2))
    return SpaceTimeField(grid=grid, T_window=T_window, coeffs=centred)


def space_time_to_samples(F: SpaceTimeField) -> np.ndarray:
    """
    Physical samples on the (x, y, t) lattice of the field's own periodic box.

    The time origin is the window start, a periodic shift that leaves L^p norms unchanged.

    Raises:
        ConfigError: If the zero mode is not at the standard centred position
    """
    if tuple(F.offsets) != tuple(n // 2 for n in F.coeffs.shape):
        raise ConfigError("space_time_to_samples needs a standard centred lattice")
    n_total = F.coeffs.size
    values = sfft.ifftn(sfft.ifftshift(F.coeffs)) * n_total
    return (values * (2.0 * math.pi) ** -1.5 * F.volume).real


def spatial_slices(F: SpaceTimeField) -> np.ndarray:
    """Spatial coefficients u^(gamma, t_j) at the time samples of the lattice."""
    n_t = F.n_t
    values = sfft.ifft(sfft.ifftshift(F.coeffs, axes=2), axis=2) * n_t
    return values * (F.d_tau / math.sqrt(2.0 * math.pi))


def mixed_norm(samples: np.ndarray, p: float, q: float, cell: float, dt: float) -> float:
    """||u||_{L^p_t L^q_{xy}} by lattice quadrature; samples indexed (x, y, t)."""
    inner = (np.sum(np.abs(samples) ** q, axis=(0, 1)) * cell) ** (1.0 / q)
    return float((np.sum(inner**p) * dt) ** (1.0 / p))
