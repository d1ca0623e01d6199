"""Gevrey/Sobolev norms, mass, energy and the almost-conserved M_sigma, E_sigma."""

import logging
import math
from collections import OrderedDict
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from .analyticity import RadiusEstimate, RadiusFitConfig, estimate_radius
from .dynamics import EquationSpec
from .errors import SpecMismatchError
from .spectral import SpectralField2D, exp_smooth, gevrey_weight, padded_samples

logger = logging.getLogger(__name__)


class GevreyParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    sigma: float = 0.0
    s: float = 0.0

    @field_validator("sigma")
    @classmethod
    def _sigma_nonnegative(cls, v: float) -> float:
        if v < 0:
            raise ValueError(f"sigma must be >= 0, got {v}")
        return v


def gevrey_norm(F: SpectralField2D, p: GevreyParams) -> float:
    """
    ||e^{sigma|gamma|_1} <gamma>^s f^||_{L^2} with the lattice Plancherel weight.

    Raises:
        RangeGuardError: If sigma*max|gamma|_1 exceeds the exp guard
    """
    weighted = gevrey_weight(F.grid, p.sigma, p.s) * np.abs(F.coeffs)
    return float(np.sqrt(np.sum(weighted**2) * F.grid.area_weight))


def mass(F: SpectralField2D) -> float:
    """int u^2 via Parseval."""
    return float(np.sum(np.abs(F.coeffs) ** 2) * F.grid.area_weight)


def _gradient_term(F: SpectralField2D) -> float:
    """1/2 int |grad u|^2."""
    w = F.grid.wave_vector()
    density = (w.abs_xi**2 + w.abs_eta**2) * np.abs(F.coeffs) ** 2
    return 0.5 * float(np.sum(density) * F.grid.area_weight)


def _cross_term(F: SpectralField2D) -> float:
    """int u_x u_y."""
    w = F.grid.wave_vector()
    return float(np.sum(w.xi * w.eta * np.abs(F.coeffs) ** 2) * F.grid.area_weight)


def power_integral(F: SpectralField2D, p: int) -> float:
    """
    int u^p over the box.

    Exact for band-limited u: the samples live on a lattice of (p+1)/2 times the
    resolution, where the trapezoidal rule integrates u^p without aliasing.
    """
    shape = ((p + 1) * F.grid.n_x // 2, (p + 1) * F.grid.n_y // 2)
    samples = padded_samples(F, shape)
    cell = F.grid.L_x * F.grid.L_y / (shape[0] * shape[1])
    return float(np.sum(samples**p) * cell)


def energy(F: SpectralField2D, spec: EquationSpec) -> float:
    """E = 1/2 int |grad u|^2 - mu/(k+2) int u^{k+2}."""
    potential = power_integral(F, spec.k + 2) if spec.effective_mu else 0.0
    return _gradient_term(F) - spec.effective_mu / (spec.k + 2) * potential


def _require_symmetrized_mzk(spec: EquationSpec, op: str) -> None:
    if spec.k != 2 or spec.form != "symmetrized":
        raise SpecMismatchError(
            f"{op} is defined for the symmetrized k=2 equation, got k={spec.k} form={spec.form}"
        )


def modified_energy(F: SpectralField2D, spec: EquationSpec) -> float:
    """
    1/2 int |grad u|^2 - 1/2 int u_x u_y - (mu a/4) int u^4.

    Raises:
        SpecMismatchError: Unless spec is symmetrized with k=2
    """
    _require_symmetrized_mzk(spec, "modified_energy")
    quartic = power_integral(F, 4) if spec.effective_mu else 0.0
    return _gradient_term(F) - 0.5 * _cross_term(F) - spec.effective_mu * spec.a / 4.0 * quartic


def M_sigma(F: SpectralField2D, sigma: float) -> float:
    """||u||^2 in G^{sigma,0}."""
    return gevrey_norm(F, GevreyParams(sigma=sigma, s=0.0)) ** 2


def E_sigma(F: SpectralField2D, sigma: float, spec: EquationSpec) -> float:
    """
    ||U||^2_{G^{0,1}} - int U_x U_y - (mu a/2) int U^4 for U = e^{sigma|D|}u.

    At sigma=0 this equals mass + 2 * modified_energy.

    Raises:
        SpecMismatchError: Unless spec is symmetrized with k=2
        RangeGuardError: If sigma breaks the exp guard
    """
    _require_symmetrized_mzk(spec, "E_sigma")
    U = exp_smooth(F, sigma, +1)
    quadratic = gevrey_norm(U, GevreyParams(sigma=0.0, s=1.0)) ** 2
    quartic = power_integral(U, 4) if spec.effective_mu else 0.0
    return quadratic - _cross_term(U) - spec.effective_mu * spec.a / 2.0 * quartic


class DiagnosticsRecord(BaseModel):
    """One row of the diagnostics time series."""

    t: float
    mass: float
    energy: float
    modified_energy: Optional[float] = None
    M_sigma: Dict[float, float] = {}
    E_sigma: Dict[float, float] = {}
    gevrey_norm: Dict[Tuple[float, float], float] = {}
    radius_estimate: Optional[RadiusEstimate] = None

    def to_row(self) -> "OrderedDict[str, float]":
        """Flat CSV row; columns absent for this equation are NaN."""
        row: "OrderedDict[str, float]" = OrderedDict()
        row["t"] = self.t
        row["mass"] = self.mass
        row["energy"] = self.energy
        row["mod_energy"] = math.nan if self.modified_energy is None else self.modified_energy
        for sigma, value in self.M_sigma.items():
            row[f"M_sigma@{sigma:g}"] = value
        for sigma, value in self.E_sigma.items():
            row[f"E_sigma@{sigma:g}"] = value
        for (sigma, s), value in self.gevrey_norm.items():
            row[f"G@{sigma:g}/{s:g}"] = value
        row["sigma_hat"] = (
            math.nan if self.radius_estimate is None else self.radius_estimate.sigma_hat
        )
        return row


def diagnostics_record(
    F: SpectralField2D,
    spec: EquationSpec,
    sigmas: Sequence[float] = (),
    gevrey_pairs: Sequence[Tuple[float, float]] = (),
    fit: Optional[RadiusFitConfig] = None,
    track_radius: bool = True,
) -> DiagnosticsRecord:
    """
    Evaluate every functional the equation supports at F.

    modified_energy and E_sigma are only defined for the symmetrized mZK; other
    specs leave them empty.
    """
    mzk = spec.k == 2 and spec.form == "symmetrized"
    return DiagnosticsRecord(
        t=F.time_tag,
        mass=mass(F),
        energy=energy(F, spec),
        modified_energy=modified_energy(F, spec) if mzk else None,
        M_sigma={sigma: M_sigma(F, sigma) for sigma in sigmas},
        E_sigma={sigma: E_sigma(F, sigma, spec) for sigma in sigmas} if mzk else {},
        gevrey_norm={
            (sigma, s): gevrey_norm(F, GevreyParams(sigma=sigma, s=s))
            for sigma, s in gevrey_pairs
        },
        radius_estimate=estimate_radius(F, fit or RadiusFitConfig()) if track_radius else None,
    )
