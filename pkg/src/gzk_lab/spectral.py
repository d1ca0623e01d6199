"""Grids, real <-> Fourier transforms, multipliers, dealiasing and e^{+-sigma|D|}."""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy import fft as sfft

from .config import settings
from .errors import ConfigError, DomainError, IntegrityError, NumericError, RangeGuardError
from .window import dyadic_bump, is_power_of_two

logger = logging.getLogger(__name__)

DEFAULT_BOX = 32.0 * math.pi
MIN_MODES = 8

# exp(sigma*|gamma|_1) must stay below exp(700) in double precision
EXP_GUARD = 700.0

HERMITIAN_TOL = 1e-10

# Retained fraction of the half-band per nonlinearity degree
DEALIAS_CUTOFF: Dict[int, float] = {2: 2.0 / 3.0, 3: 0.5}


class Grid2D(BaseModel):
    """Periodic box [0, L_x) x [0, L_y) sampled on n_x x n_y points."""

    model_config = ConfigDict(frozen=True)

    n_x: int = 256
    n_y: int = 256
    L_x: float = DEFAULT_BOX
    L_y: float = DEFAULT_BOX

    @field_validator("n_x", "n_y")
    @classmethod
    def _power_of_two(cls, v: int) -> int:
        if v < MIN_MODES or not is_power_of_two(v):
            raise ValueError(f"mode count must be a power of two >= {MIN_MODES}, got {v}")
        return v

    @field_validator("L_x", "L_y")
    @classmethod
    def _positive_length(cls, v: float) -> float:
        if not v > 0:
            raise ValueError(f"box length must be positive, got {v}")
        return v

    @classmethod
    def create(
        cls, n_x: int, n_y: int = 0, L_x: float = DEFAULT_BOX, L_y: float = 0.0
    ) -> "Grid2D":
        """Square defaults: n_y=n_x and L_y=L_x when omitted."""
        return cls(n_x=n_x, n_y=n_y or n_x, L_x=L_x, L_y=L_y or L_x)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_x, self.n_y)

    @property
    def d_xi(self) -> float:
        return 2.0 * math.pi / self.L_x

    @property
    def d_eta(self) -> float:
        return 2.0 * math.pi / self.L_y

    @property
    def area_weight(self) -> float:
        """Plancherel weight d_xi*d_eta of one lattice mode."""
        return self.d_xi * self.d_eta

    @property
    def cell_area(self) -> float:
        """Quadrature weight of one physical sample."""
        return self.L_x * self.L_y / (self.n_x * self.n_y)

    @property
    def max_l1(self) -> float:
        """Largest |gamma|_1 over represented modes."""
        return 0.5 * self.n_x * self.d_xi + 0.5 * self.n_y * self.d_eta

    def mode_indices(self) -> Tuple[np.ndarray, np.ndarray]:
        """Integer mode indices in FFT order, meshed with indexing='ij'."""
        m_x = np.rint(sfft.fftfreq(self.n_x, 1.0 / self.n_x)).astype(int)
        m_y = np.rint(sfft.fftfreq(self.n_y, 1.0 / self.n_y)).astype(int)
        return np.meshgrid(m_x, m_y, indexing="ij")

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Sample positions x_i = i*L_x/n_x, y_j = j*L_y/n_y (indexing='ij')."""
        x = np.arange(self.n_x) * (self.L_x / self.n_x)
        y = np.arange(self.n_y) * (self.L_y / self.n_y)
        return np.meshgrid(x, y, indexing="ij")

    def wave_vector(self) -> "WaveVector":
        m_x, m_y = self.mode_indices()
        abs_xi = np.abs(m_x) * self.d_xi
        abs_eta = np.abs(m_y) * self.d_eta
        # The unpaired Nyquist index has no signed frequency
        xi = np.where(m_x == -self.n_x // 2, 0, m_x) * self.d_xi
        eta = np.where(m_y == -self.n_y // 2, 0, m_y) * self.d_eta
        return WaveVector(xi=xi, eta=eta, abs_xi=abs_xi, abs_eta=abs_eta)


@dataclass(frozen=True)
class WaveVector:
    """
    Frequencies of every represented mode.

    xi/eta are the signed frequencies used by odd symbols (derivatives, dispersion);
    abs_xi/abs_eta are the magnitudes used by even weights.
    """

    xi: np.ndarray
    eta: np.ndarray
    abs_xi: np.ndarray
    abs_eta: np.ndarray

    @property
    def l1(self) -> np.ndarray:
        """|gamma| = |xi| + |eta|."""
        return self.abs_xi + self.abs_eta

    @property
    def norm(self) -> np.ndarray:
        """||gamma|| = (xi^2 + eta^2)^(1/2)."""
        return np.hypot(self.abs_xi, self.abs_eta)

    @property
    def bracket(self) -> np.ndarray:
        """<gamma> = (1 + ||gamma||^2)^(1/2)."""
        return np.sqrt(1.0 + self.abs_xi**2 + self.abs_eta**2)

    @property
    def dispersion(self) -> np.ndarray:
        """xi^3 + eta^3, the phase rate of the free flow."""
        return self.xi**3 + self.eta**3


@dataclass(frozen=True)
class SpectralField2D:
    """Fourier coefficients (FFT order) of a field on a Grid2D at time time_tag."""

    grid: Grid2D
    coeffs: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.shape != self.grid.shape:
            raise ConfigError(
                f"coefficient array shape {coeffs.shape} does not match grid {self.grid.shape}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, grid: Grid2D, time_tag: float = 0.0) -> "SpectralField2D":
        return cls(grid=grid, coeffs=np.zeros(grid.shape, dtype=complex), time_tag=time_tag)

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField2D":
        return dataclasses.replace(self, coeffs=coeffs)

    def at_time(self, t: float) -> "SpectralField2D":
        return dataclasses.replace(self, time_tag=t)

    def __add__(self, other: "SpectralField2D") -> "SpectralField2D":
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField2D") -> "SpectralField2D":
        return self.with_coeffs(self.coeffs - other.coeffs)

    def scale(self, factor: complex) -> "SpectralField2D":
        return self.with_coeffs(self.coeffs * factor)


class ProjectionSpec(BaseModel):
    """Dyadic frequency level N and modulation level L."""

    model_config = ConfigDict(frozen=True)

    N: int = 1
    L: int = 1

    @field_validator("N", "L")
    @classmethod
    def _dyadic(cls, v: int) -> int:
        if not is_power_of_two(v):
            raise ValueError(f"dyadic level must be a power of two >= 1, got {v}")
        return v


# ---------------------------------------------------------------------------
# Raw transforms (any lattice shape, used directly by the padded products)
# ---------------------------------------------------------------------------


def _to_spectral(samples: np.ndarray, L_x: float, L_y: float) -> np.ndarray:
    n = samples.shape[0] * samples.shape[1]
    return sfft.fft2(samples) * (L_x * L_y / (2.0 * math.pi * n))


def _to_physical(coeffs: np.ndarray, L_x: float, L_y: float) -> np.ndarray:
    n = coeffs.shape[0] * coeffs.shape[1]
    return sfft.ifft2(coeffs) * (2.0 * math.pi * n / (L_x * L_y))


def _drop_nyquist(coeffs: np.ndarray) -> np.ndarray:
    out = np.array(coeffs, dtype=complex)
    out[out.shape[0] // 2, :] = 0.0
    out[:, out.shape[1] // 2] = 0.0
    return out


def _pad(coeffs: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Embed an FFT-ordered spectrum in a larger lattice; the Nyquist lines are dropped."""
    n_x, n_y = coeffs.shape
    big = np.zeros(shape, dtype=complex)
    ox = shape[0] // 2 - n_x // 2
    oy = shape[1] // 2 - n_y // 2
    big[ox : ox + n_x, oy : oy + n_y] = sfft.fftshift(_drop_nyquist(coeffs))
    return sfft.ifftshift(big)


def _truncate(coeffs: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Inverse of _pad: keep the central lattice, zero its Nyquist lines."""
    big = sfft.fftshift(coeffs)
    ox = coeffs.shape[0] // 2 - shape[0] // 2
    oy = coeffs.shape[1] // 2 - shape[1] // 2
    small = sfft.ifftshift(big[ox : ox + shape[0], oy : oy + shape[1]])
    return _drop_nyquist(small)


def hermitian_defect(coeffs: np.ndarray) -> float:
    """Relative max |c(-m) - conj(c(m))| over the lattice."""
    reflected = np.roll(np.flip(coeffs, axis=(0, 1)), 1, axis=(0, 1))
    scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(coeffs - np.conj(reflected)))) / scale


def _debug_check(F: SpectralField2D, op: str) -> None:
    if settings.debug_checks:
        defect = hermitian_defect(F.coeffs)
        if defect > HERMITIAN_TOL:
            raise IntegrityError(f"{op} broke Hermitian symmetry (defect {defect:.3e})")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def forward_transform(
    samples: np.ndarray, grid: Grid2D, time_tag: float = 0.0
) -> SpectralField2D:
    """
    Real samples -> coefficients approximating the unitary transform (1/2pi) int e^{-ix.gamma} f.

    Raises:
        ConfigError: If the sample array does not match the grid
    """
    samples = np.asarray(samples)
    if samples.shape != grid.shape:
        raise ConfigError(f"sample array shape {samples.shape} does not match grid {grid.shape}")
    return SpectralField2D(grid, _to_spectral(samples, grid.L_x, grid.L_y), time_tag)


def inverse_transform(F: SpectralField2D) -> np.ndarray:
    """
    Coefficients -> real samples.

    Raises:
        IntegrityError: If the spectrum is not Hermitian within HERMITIAN_TOL
    """
    defect = hermitian_defect(F.coeffs)
    if defect > HERMITIAN_TOL:
        raise IntegrityError(
            f"spectrum at t={F.time_tag} is not Hermitian (relative defect {defect:.3e})"
        )
    return _to_physical(F.coeffs, F.grid.L_x, F.grid.L_y).real


def apply_multiplier(
    F: SpectralField2D, m: Callable[[WaveVector], np.ndarray]
) -> SpectralField2D:
    """
    Multiply every coefficient by the symbol m(gamma).

    Raises:
        NumericError: If the symbol is not finite on some represented mode
    """
    values = np.broadcast_to(np.asarray(m(F.grid.wave_vector()), dtype=complex), F.grid.shape)
    bad = ~np.isfinite(values)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        m_x, m_y = F.grid.mode_indices()
        raise NumericError(
            f"multiplier is not finite at mode ({m_x[i, j]}, {m_y[i, j]}): {values[i, j]}"
        )
    out = F.with_coeffs(F.coeffs * values)
    _debug_check(out, "apply_multiplier")
    return out


def check_exp_guard(grid: Grid2D, sigma: float) -> None:
    """
    Raises:
        DomainError: If sigma < 0
        RangeGuardError: If sigma*max|gamma|_1 exceeds EXP_GUARD
    """
    if sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    if sigma * grid.max_l1 > EXP_GUARD:
        raise RangeGuardError(
            f"sigma={sigma} gives exponent {sigma * grid.max_l1:.1f} > {EXP_GUARD}; "
            f"use sigma <= {EXP_GUARD / grid.max_l1:.4g} or truncate the spectrum at the "
            f"noise floor first"
        )


def exp_smooth(F: SpectralField2D, sigma: float, sign: int = 1) -> SpectralField2D:
    """Apply e^{sign*sigma*|D|}, i.e. scale coefficients by e^{sign*sigma*(|xi|+|eta|)}."""
    if sign not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign}")
    if sign > 0:
        check_exp_guard(F.grid, sigma)
    elif sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return F
    return apply_multiplier(F, lambda w: np.exp(sign * sigma * w.l1))


def gevrey_weight(grid: Grid2D, sigma: float, s: float) -> np.ndarray:
    """e^{sigma|gamma|_1} <gamma>^s on every represented mode."""
    check_exp_guard(grid, sigma)
    w = grid.wave_vector()
    return np.exp(sigma * w.l1) * w.bracket**s


def embedding_constant(
    grid: Grid2D, source: Tuple[float, float], target: Tuple[float, float]
) -> float:
    """
    Lattice constant C with ||f||_{G^{target}} <= C ||f||_{G^{source}} for every field.

    Args:
        source: (sigma, s) of the stronger norm
        target: (sigma', s') of the weaker norm
    """
    ratio = gevrey_weight(grid, *target) / gevrey_weight(grid, *source)
    return float(np.max(ratio))


def dealias_mask(grid: Grid2D, degree: int) -> np.ndarray:
    """True on retained modes: max(|m_x|/(n_x/2), |m_y|/(n_y/2)) <= cutoff."""
    if degree not in DEALIAS_CUTOFF:
        raise ConfigError(f"nonlinearity degree must be 2 or 3, got {degree}")
    m_x, m_y = grid.mode_indices()
    ratio = np.maximum(np.abs(m_x) / (grid.n_x / 2), np.abs(m_y) / (grid.n_y / 2))
    return ratio <= DEALIAS_CUTOFF[degree]


def dealias(F: SpectralField2D, degree: int) -> SpectralField2D:
    """Zero the modes beyond the cutoff for a product of the given degree."""
    return F.with_coeffs(np.where(dealias_mask(F.grid, degree), F.coeffs, 0.0))


def padded_shape(grid: Grid2D, degree: int) -> Tuple[int, int]:
    """Lattice on which a degree-p product of Nyquist-free fields is alias-free."""
    return ((degree + 1) * grid.n_x // 2, (degree + 1) * grid.n_y // 2)


def padded_samples(F: SpectralField2D, shape: Tuple[int, int]) -> np.ndarray:
    """Physical samples of F on a refined lattice of the same box."""
    return _to_physical(_pad(F.coeffs, shape), F.grid.L_x, F.grid.L_y).real


def padded_product(fields: Sequence[SpectralField2D]) -> SpectralField2D:
    """
    Exact spectral coefficients of the pointwise product of the fields.

    The product is formed on the (p+1)/2-padded lattice and truncated back, so
    every represented mode equals the direct convolution (Nyquist lines dropped).
    """
    if not fields:
        raise ConfigError("padded_product needs at least one field")
    grid = fields[0].grid
    if any(f.grid != grid for f in fields):
        raise ConfigError("padded_product fields live on different grids")
    shape = padded_shape(grid, max(len(fields), 2))
    product = np.ones(shape)
    for f in fields:
        product = product * padded_samples(f, shape)
    coeffs = _truncate(_to_spectral(product, grid.L_x, grid.L_y), grid.shape)
    return SpectralField2D(grid, coeffs, fields[0].time_tag)


def padded_power(F: SpectralField2D, degree: int) -> SpectralField2D:
    """Exact coefficients of F**degree (same contract as padded_product)."""
    shape = padded_shape(F.grid, max(degree, 2))
    samples = padded_samples(F, shape)
    coeffs = _truncate(_to_spectral(samples**degree, F.grid.L_x, F.grid.L_y), F.grid.shape)
    return F.with_coeffs(coeffs)


def project_PN(F: SpectralField2D, spec: ProjectionSpec) -> SpectralField2D:
    """Smooth restriction to the dyadic annulus ||gamma|| ~ N via psi_N."""
    return apply_multiplier(F, lambda w: dyadic_bump(w.norm, spec.N))


def translate(F: SpectralField2D, shift: Tuple[float, float]) -> SpectralField2D:
    """Field shifted by (dx, dy): coefficients times e^{-i(xi dx + eta dy)}."""
    dx, dy = shift
    return apply_multiplier(F, lambda w: np.exp(-1j * (w.xi * dx + w.eta * dy)))


def evaluate_at(F: SpectralField2D, points: np.ndarray, chunk: int = 64) -> np.ndarray:
    """
    Evaluate the trigonometric interpolant of F at arbitrary points.

    Args:
        F: Field
        points: Array of shape (P, 2) with (x, y) rows
        chunk: Points per vectorized block

    Returns:
        Array of P real values
    """
    grid = F.grid
    m_x, m_y = grid.mode_indices()
    xi = (m_x * grid.d_xi).ravel()
    eta = (m_y * grid.d_eta).ravel()
    c = F.coeffs.ravel()
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(len(pts))
    for start in range(0, len(pts), chunk):
        block = pts[start : start + chunk]
        phase = np.exp(1j * (np.outer(block[:, 0], xi) + np.outer(block[:, 1], eta)))
        out[start : start + chunk] = (phase @ c).real
    return out * (2.0 * math.pi / (grid.L_x * grid.L_y))


def random_field(
    grid: Grid2D,
    rng: np.random.Generator,
    taper: float = 2.0,
    amplitude: float = 1.0,
    degree: int = 0,
) -> SpectralField2D:
    """
    Smooth random real field with complex Gaussian spectrum tapered by <gamma>^{-taper}.

    Args:
        grid: Target grid
        rng: Random generator (one stream per trial)
        taper: Power-law decay of the spectrum
        amplitude: Max |u| of the returned samples
        degree: If 2 or 3, dealias for that nonlinearity degree

    Returns:
        Hermitian SpectralField2D
    """
    w = grid.wave_vector()
    spectrum = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    spectrum *= w.bracket ** (-taper)
    if degree:
        spectrum = np.where(dealias_mask(grid, degree), spectrum, 0.0)
    samples = _to_physical(spectrum, grid.L_x, grid.L_y).real
    peak = float(np.max(np.abs(samples)))
    if peak == 0.0:
        raise NumericError("random field drew an all-zero spectrum")
    F = forward_transform(samples * (amplitude / peak), grid)
    return dealias(F, degree) if degree else F


def refine(F: SpectralField2D, factor: int) -> SpectralField2D:
    """The same band-limited field on a grid with factor times the modes per axis."""
    if factor < 1 or not is_power_of_two(factor):
        raise ConfigError(f"refinement factor must be a power of two, got {factor}")
    fine = Grid2D.create(F.grid.n_x * factor, F.grid.n_y * factor, F.grid.L_x, F.grid.L_y)
    return SpectralField2D(fine, _pad(F.coeffs, fine.shape), F.time_tag)
