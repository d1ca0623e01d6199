"""Equation right-hand sides, the symmetrizing change of variables, and commutators F, G."""

import logging
import math
from dataclasses import dataclass
from typing import Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy import signal

from .errors import BlowUpError, ConfigError, DomainError, SpecMismatchError
from .spacetime import SpaceTimeField, convolution_scale
from .spectral import (
    Grid2D,
    SpectralField2D,
    WaveVector,
    dealias,
    exp_smooth,
    forward_transform,
    padded_power,
)

logger = logging.getLogger(__name__)

A_COEF = 2.0 ** (-2.0 / 3.0)
B_COEF = math.sqrt(3.0) * 2.0 ** (-2.0 / 3.0)

MAX_THETA = 0.25


class EquationSpec(BaseModel):
    """
    du/dt + dx Lap u + mu dx u^{k+1} = 0 (original) or
    du/dt + (dx^3 + dy^3) u + mu a (dx + dy) u^{k+1} = 0 (symmetrized).

    nonlinear=False switches the u^{k+1} term off for linear-flow diagnostics.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    k: int = 1
    mu: int = 1
    form: Literal["original", "symmetrized"] = "symmetrized"
    nonlinear: bool = True

    @field_validator("k")
    @classmethod
    def _check_k(cls, v: int) -> int:
        if v not in (1, 2):
            raise ValueError("k must be 1 or 2")
        return v

    @field_validator("mu")
    @classmethod
    def _check_mu(cls, v: int) -> int:
        if v not in (-1, 1):
            raise ValueError("mu must be -1 or +1")
        return v

    @property
    def a(self) -> float:
        return A_COEF

    @property
    def b_coef(self) -> float:
        return B_COEF

    @property
    def degree(self) -> int:
        """Degree of the nonlinearity, k+1; also the dealias degree."""
        return self.k + 1

    @property
    def effective_mu(self) -> int:
        return self.mu if self.nonlinear else 0

    @property
    def coupling(self) -> float:
        """Coefficient of the derivative in front of u^{k+1}: mu*a or mu."""
        scale = self.a if self.form == "symmetrized" else 1.0
        return self.effective_mu * scale


@dataclass(frozen=True)
class CoordinateMap:
    """x -> a x + b y, y -> a x - b y and its inverse."""

    forward: np.ndarray
    inverse: np.ndarray
    determinant: float

    @classmethod
    def standard(cls) -> "CoordinateMap":
        forward = np.array([[A_COEF, B_COEF], [A_COEF, -B_COEF]])
        return cls(
            forward=forward, inverse=np.linalg.inv(forward), determinant=-2 * A_COEF * B_COEF
        )


def coordinate_map_apply(
    p: np.ndarray, m: CoordinateMap, direction: Literal["fwd", "inv"] = "fwd"
) -> np.ndarray:
    """
    Linear image of a point or of an array of points (rows).

    Raises:
        ConfigError: If direction is not 'fwd' or 'inv'
    """
    if direction == "fwd":
        matrix = m.forward
    elif direction == "inv":
        matrix = m.inverse
    else:
        raise ConfigError(f"direction must be 'fwd' or 'inv', got {direction!r}")
    return np.asarray(p, dtype=float) @ matrix.T


def linear_symbol(spec: EquationSpec, w: WaveVector) -> np.ndarray:
    """Symbol of minus the linear operator; e^{t*symbol} is the free propagator."""
    if spec.form == "symmetrized":
        return 1j * w.dispersion
    return 1j * w.xi * (w.xi**2 + w.eta**2)


def derivative_symbol(spec: EquationSpec, w: WaveVector) -> np.ndarray:
    """Symbol of coupling*(dx + dy) (symmetrized) or coupling*dx (original)."""
    if spec.form == "symmetrized":
        return spec.coupling * 1j * (w.xi + w.eta)
    return spec.coupling * 1j * w.xi


def nonlinear_term(F: SpectralField2D, spec: EquationSpec) -> SpectralField2D:
    """
    -coupling * D(u^{k+1}) with the exact padded product, dealiased.

    Raises:
        BlowUpError: If the product is not finite
    """
    if spec.effective_mu == 0:
        return SpectralField2D.zeros(F.grid, F.time_tag)
    power = padded_power(F, spec.degree)
    if not np.all(np.isfinite(power.coeffs)):
        raise BlowUpError(f"non-finite u^{spec.degree} at t={F.time_tag}", F.time_tag, F)
    symbol = derivative_symbol(spec, F.grid.wave_vector())
    return dealias(power.with_coeffs(-symbol * power.coeffs), spec.degree)


def rhs(F: SpectralField2D, spec: EquationSpec) -> SpectralField2D:
    """du/dt = linear part + nonlinear part, dealiased for degree k+1."""
    w = F.grid.wave_vector()
    linear = F.coeffs * linear_symbol(spec, w)
    total = linear + nonlinear_term(F, spec).coeffs
    return dealias(F.with_coeffs(total), spec.degree)


def _commutator(U: SpectralField2D, sigma: float, spec: EquationSpec) -> SpectralField2D:
    if sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0 or spec.effective_mu == 0:
        return SpectralField2D.zeros(U.grid, U.time_tag)
    p = spec.degree
    direct = padded_power(U, p)
    smoothed = exp_smooth(padded_power(exp_smooth(U, sigma, -1), p), sigma, +1)
    bracket = direct.coeffs - smoothed.coeffs
    symbol = derivative_symbol(spec, U.grid.wave_vector())
    return dealias(U.with_coeffs(symbol * bracket), p)


def commutator_F(U: SpectralField2D, sigma: float, spec: EquationSpec) -> SpectralField2D:
    """
    F(U) = mu a (dx+dy)[U^2 - e^{sigma|D|}((e^{-sigma|D|}U)^2)] for U = e^{sigma|D|}u.

    Raises:
        SpecMismatchError: If spec.k != 1
        RangeGuardError: If sigma breaks the exp overflow guard
    """
    if spec.k != 1:
        raise SpecMismatchError(f"commutator_F is defined for k=1, got k={spec.k}")
    return _commutator(U, sigma, spec)


def commutator_G(U: SpectralField2D, sigma: float, spec: EquationSpec) -> SpectralField2D:
    """
    G(U) = mu a (dx+dy)[U^3 - e^{sigma|D|}((e^{-sigma|D|}U)^3)] for U = e^{sigma|D|}u.

    Raises:
        SpecMismatchError: If spec.k != 2
        RangeGuardError: If sigma breaks the exp overflow guard
    """
    if spec.k != 2:
        raise SpecMismatchError(f"commutator_G is defined for k=2, got k={spec.k}")
    return _commutator(U, sigma, spec)


def b_theta_apply(u: SpaceTimeField, v: SpaceTimeField, theta: float) -> SpaceTimeField:
    """
    B_theta(u, v)^ (gamma, tau) = conv over (gamma1, tau1) of
    min(|gamma - gamma1|_1, |gamma1|_1)^theta u^(gamma - gamma1, tau - tau1) v^(gamma1, tau1).

    0^0 is taken as 1, so theta=0 is the plain product.

    Raises:
        DomainError: If theta is outside [0, 1/4)
        ConfigError: If the fields live on different boxes or windows
    """
    if not 0.0 <= theta < MAX_THETA:
        raise DomainError(f"theta must lie in [0, 1/4), got {theta}")
    u.check_compatible(v)
    l1_u = u.spatial_l1()
    l1_v = v.spatial_l1()
    nx_u, ny_u, nt_u = u.coeffs.shape
    nx_v, ny_v, nt_v = v.coeffs.shape
    out = np.zeros((nx_u + nx_v - 1, ny_u + ny_v - 1, nt_u + nt_v - 1), dtype=complex)
    for i, j in zip(*np.nonzero(np.any(v.coeffs != 0, axis=2))):
        kernel = np.minimum(l1_u, l1_v[i, j]) ** theta
        weighted = kernel[:, :, None] * u.coeffs
        # Linear convolution in tau only; spatial shift by (i, j)
        block = signal.fftconvolve(weighted, v.coeffs[i, j, None, None, :], axes=2)
        out[i : i + nx_u, j : j + ny_u, :] += block
    return SpaceTimeField(
        grid=u.grid,
        T_window=u.T_window,
        coeffs=out * convolution_scale(u),
        offsets=tuple(a + b for a, b in zip(u.offsets, v.offsets)),
    )


def min_kernel_bound_check(
    rng: np.random.Generator,
    samples: int,
    C: float,
    norm: Literal["l1", "l2"] = "l1",
    scale: float = 1e3,
) -> Tuple[int, float]:
    """
    Sample min(|gamma - gamma1|, |gamma1|) <= C <gamma - gamma1><gamma1>/<gamma>.

    Args:
        rng: Random generator
        samples: Number of (gamma, gamma1) pairs
        C: Constant on the right-hand side
        norm: 'l1' for |.|_1 (the Gevrey weight), 'l2' for the Euclidean norm
        scale: Largest sampled frequency magnitude

    Returns:
        Tuple of (violation count, max LHS/RHS ratio)
    """
    mags = np.exp(rng.uniform(np.log(1e-3), np.log(scale), size=(samples, 4)))
    signs = rng.choice([-1.0, 1.0], size=(samples, 4))
    pts = mags * signs
    # Diagonal and zero configurations where the minimum is attained at the kernel's edges
    pts[: samples // 10, 2:] = pts[: samples // 10, :2]
    pts[samples // 10 : samples // 5, 2:] = 0.0
    gamma, gamma1 = pts[:, :2], pts[:, 2:]
    diff = gamma - gamma1
    if norm == "l1":
        size = lambda g: np.abs(g).sum(axis=1)  # noqa: E731
    else:
        size = lambda g: np.hypot(g[:, 0], g[:, 1])  # noqa: E731
    bracket = lambda g: np.sqrt(1.0 + (g**2).sum(axis=1))  # noqa: E731
    lhs = np.minimum(size(diff), size(gamma1))
    rhs = C * bracket(diff) * bracket(gamma1) / bracket(gamma)
    ratio = lhs / rhs
    violations = int(np.count_nonzero(lhs > rhs * (1 + 1e-12)))
    return violations, float(ratio.max())


def line_soliton(
    grid: Grid2D, spec: EquationSpec, K: float, x0: float, t: float = 0.0
) -> SpectralField2D:
    """
    y-independent solitary wave of the configured equation, wrapped periodically.

    k=1: u = 6K^2/c sech^2(K(x - 4K^2 t - x0));
    k=2 (c > 0): u = K sqrt(2/c) sech(K(x - K^2 t - x0)),
    with c = mu (original) or mu*a (symmetrized).

    Raises:
        DomainError: If K <= 0 or the equation has no line soliton (defocusing mZK, linear flow)
    """
    if K <= 0:
        raise DomainError(f"soliton wavenumber K must be positive, got {K}")
    c = spec.coupling
    if c == 0:
        raise DomainError("linear flow has no solitary wave")
    x, _ = grid.coordinates()
    if spec.k == 1:
        speed, amplitude = 4 * K**2, 6 * K**2 / c
    else:
        if c < 0:
            raise DomainError("defocusing mZK has no line soliton")
        speed, amplitude = K**2, K * math.sqrt(2.0 / c)
    centre = x0 + speed * t
    xi = np.mod(x - centre + grid.L_x / 2, grid.L_x) - grid.L_x / 2
    profile = 1.0 / np.cosh(K * xi)
    samples = amplitude * (profile**2 if spec.k == 1 else profile)
    return forward_transform(samples, grid, time_tag=t)
