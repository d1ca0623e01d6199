"""
Ratio probes for the bilinear and trilinear X^{s,b} estimates, the Q_L Strichartz bound,
the windowed semigroup bound and the X^{s,b} -> C_t G^{sigma,s} embedding.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..analyticity import epsilon_of_s
from ..errors import DomainError
from ..functionals import GevreyParams, gevrey_norm
from ..spacetime import (
    BourgainParams,
    SpaceTimeField,
    l2_norm,
    mixed_norm,
    project_QL,
    space_time_from_free,
    space_time_product,
    space_time_random,
    space_time_to_samples,
    spatial_slices,
    xsb_norm,
)
from ..spectral import Grid2D, ProjectionSpec, SpectralField2D, random_field, refine
from .report import (
    STABILITY_LIMIT,
    ProbeParams,
    ProbeReport,
    stability_factor,
    summarize,
    trial_rng,
)

logger = logging.getLogger(__name__)

STRICHARTZ_LEVELS = (1, 4, 16, 64)

# Spatial lattice of the Strichartz probe: 16 x 16 modes on the probe box
STRICHARTZ_MODES = 16
STRICHARTZ_N_T = 256

SEMIGROUP_B = 0.6

# Two resolutions of the free-flow ratio may differ by this factor before being flagged
SEMIGROUP_DRIFT_LIMIT = 1.2


def box_grid(box: float) -> Grid2D:
    """Grid carrying only the box spacing for probe lattices of arbitrary extent."""
    return Grid2D.create(8, L_x=box)


def _epsilon(p: ProbeParams) -> float:
    return float(epsilon_of_s(p.s)) if p.eps is None else p.eps


def _within_limit(factor: Optional[float], limit: float = STABILITY_LIMIT) -> bool:
    return factor is not None and factor <= limit


def _derivative_weight(F: SpaceTimeField) -> np.ndarray:
    """|xi + eta|, the modulus of the (dx + dy) symbol."""
    xi, eta, _ = F.signed_axes()
    return np.abs(xi[:, None] + eta[None, :])[:, :, None]


def multilinear_ratio(
    factors: Sequence[SpaceTimeField], s: float, eps: float, sigma: float = 0.0
) -> Optional[float]:
    """
    ||(dx+dy)(u1...um)||_{X^{sigma,s,-1/2+2eps}} / prod ||ui||_{X^{sigma,s,1/2+eps}}.

    Returns:
        The ratio, or None if some factor has zero norm
    """
    inputs = BourgainParams(sigma=sigma, s=s, b=0.5 + eps)
    output = BourgainParams(sigma=sigma, s=s, b=-0.5 + 2.0 * eps)
    denominator = 1.0
    for u in factors:
        denominator *= xsb_norm(u, inputs)
    if denominator == 0.0:
        return None
    product = space_time_product(*factors)
    derivative = product.with_coeffs(product.coeffs * _derivative_weight(product))
    return xsb_norm(derivative, output) / denominator


def single_mode_field(
    grid: Grid2D, T_window: float, mode: Tuple[int, int, int], amplitude: complex = 1.0
) -> SpaceTimeField:
    """Field with one nonzero coefficient at integer mode (m_x, m_y, m_t)."""
    m_x, m_y, m_t = mode
    shape = (2 * abs(m_x) + 1, 2 * abs(m_y) + 1, 2 * abs(m_t) + 1)
    coeffs = np.zeros(shape, dtype=complex)
    coeffs[m_x + abs(m_x), m_y + abs(m_y), m_t + abs(m_t)] = amplitude
    return SpaceTimeField(grid=grid, T_window=T_window, coeffs=coeffs)


def single_mode_ratio(
    grid: Grid2D,
    T_window: float,
    modes: Sequence[Tuple[int, int, int]],
    s: float,
    eps: float,
    sigma: float = 0.0,
) -> float:
    """
    Closed form of multilinear_ratio for single-mode factors.

    A product of m point masses is one point mass scaled by ((2pi)^{-3/2} V)^{m-1}, so the
    ratio is (2pi)^{-3(m-1)/2} V^{(m-1)/2} |xi+eta| w_out / prod w_i, V being the lattice cell.
    """
    d_tau = 2.0 * math.pi / T_window
    volume = grid.d_xi * grid.d_eta * d_tau

    def weight(mode: Tuple[int, ...], b: float) -> float:
        xi, eta, tau = mode[0] * grid.d_xi, mode[1] * grid.d_eta, mode[2] * d_tau
        spatial = math.exp(sigma * (abs(xi) + abs(eta))) * (1.0 + xi**2 + eta**2) ** (s / 2)
        return spatial * (1.0 + (tau - xi**3 - eta**3) ** 2) ** (b / 2)

    total = tuple(sum(m[i] for m in modes) for i in range(3))
    m = len(modes)
    derivative = abs(total[0] * grid.d_xi + total[1] * grid.d_eta)
    numerator = derivative * weight(total, -0.5 + 2 * eps)
    denominator = math.prod(weight(mode, 0.5 + eps) for mode in modes)
    scale = (2.0 * math.pi) ** (-1.5 * (m - 1)) * volume ** ((m - 1) / 2.0)
    return scale * numerator / denominator


def _random_factor(p: ProbeParams, band: int, rng: np.random.Generator) -> SpaceTimeField:
    shape = (2 * band + 1, 2 * band + 1, p.n_t)
    return space_time_random(box_grid(p.box), shape, p.t_window, rng, p.taper)


def _ratio_trials(
    p: ProbeParams, band: int, n_factors: int, s: float, eps: float
) -> Tuple[List[float], int]:
    ratios: List[float] = []
    skipped = 0
    for trial in range(p.trials):
        rng = trial_rng(p.seed, trial)
        factors = [_random_factor(p, band, rng) for _ in range(n_factors)]
        ratio = multilinear_ratio(factors, s, eps, p.sigma)
        if ratio is None or not math.isfinite(ratio):
            skipped += 1
            continue
        ratios.append(ratio)
    return ratios, skipped


def _multilinear_probe(name: str, p: ProbeParams, n_factors: int) -> ProbeReport:
    eps = _epsilon(p)
    ratios, skipped = _ratio_trials(p, p.band, n_factors, p.s, eps)
    doubled, _ = _ratio_trials(p, 2 * p.band, n_factors, p.s, eps)
    report = summarize(
        name,
        ratios,
        params={
            "s": p.s,
            "eps": eps,
            "sigma": p.sigma,
            "band": p.band,
            "trials": p.trials,
            "seed": p.seed,
            "n_t": p.n_t,
        },
        skipped=skipped,
    )
    report.stability_factor = stability_factor(report.max_ratio, max(doubled, default=0.0))
    report.stable = _within_limit(report.stability_factor)
    if not report.stable:
        report.notes.append(
            f"max ratio moved by more than x{STABILITY_LIMIT:g} between band {p.band} and "
            f"{2 * p.band}"
        )
    logger.info(
        f"{name}: max ratio {report.max_ratio:.4g}, stability {report.stability_factor}, "
        f"skipped {skipped}"
    )
    return report


def bilinear_probe(p: ProbeParams) -> ProbeReport:
    """
    Random-field ratio for ||(dx+dy)(u1 u2)||_{X^{s,-1/2+2eps}} <= C ||u1|| ||u2||
    in X^{s,1/2+eps}, eps = epsilon(s), with Gevrey weights when p.sigma > 0.

    Raises:
        DomainError: If s <= -1/4
        MemoryGuardError: If the doubled-band product lattice is too large
    """
    epsilon_of_s(p.s)
    return _multilinear_probe("bilinear", p, 2)


def trilinear_probe(p: ProbeParams) -> ProbeReport:
    """
    Same as bilinear_probe for (dx+dy)(u1 u2 u3).

    Raises:
        DomainError: If s < 1/4
    """
    if p.s < 0.25:
        raise DomainError(f"trilinear estimate needs s >= 1/4, got {p.s}")
    return _multilinear_probe("trilinear", p, 3)


# ---------------------------------------------------------------------------
# Q_L Strichartz
# ---------------------------------------------------------------------------


def strichartz_exponent(p_exp: float) -> Tuple[float, float]:
    """
    Returns:
        Tuple of (q with 2/p + 2/q = 1, L exponent 2/(3p) + 1/q)

    Raises:
        DomainError: If p < 4 or p is infinite
    """
    if not math.isfinite(p_exp) or p_exp < 4:
        raise DomainError(f"Strichartz exponent p must be finite and >= 4, got {p_exp}")
    q = 2.0 * p_exp / (p_exp - 2.0)
    return q, 2.0 / (3.0 * p_exp) + 1.0 / q


def strichartz_QL_probe(
    p_exp: float,
    p: ProbeParams,
    modes: int = STRICHARTZ_MODES,
    n_t: int = STRICHARTZ_N_T,
) -> ProbeReport:
    """
    ||Q_L u||_{L^p_t L^q_xy} / (L^{2/(3p)+1/q} ||Q_L u||_{L^2}) for L in 1, 4, 16, 64.

    The norms are taken on the periodic (x, y, t) box of the lattice.
    """
    q, exponent = strichartz_exponent(p_exp)
    grid = Grid2D.create(modes, L_x=p.box)
    dt = p.t_window / n_t
    ratios: List[float] = []
    per_level: Dict[int, float] = {}
    skipped = 0
    for L in STRICHARTZ_LEVELS:
        spec = ProjectionSpec(L=L)
        level_max = 0.0
        for trial in range(p.trials):
            rng = trial_rng(p.seed, trial, L)
            raw = space_time_random(grid, (modes, modes, n_t), p.t_window, rng, p.taper)
            u = project_QL(raw, spec)
            norm = l2_norm(u)
            if norm == 0.0:
                skipped += 1
                continue
            lhs = mixed_norm(space_time_to_samples(u), p_exp, q, grid.cell_area, dt)
            ratio = lhs / (L**exponent * norm)
            ratios.append(ratio)
            level_max = max(level_max, ratio)
        per_level[L] = level_max
    report = summarize(
        "strichartz",
        ratios,
        params={"p": p_exp, "q": q, "exponent": exponent, "trials": p.trials, "seed": p.seed},
        skipped=skipped,
    )
    maxima = [v for v in per_level.values() if v > 0]
    report.stability_factor = max(maxima) / min(maxima) if maxima else None
    report.stable = _within_limit(report.stability_factor)
    report.notes.append(
        "per-level max: " + ", ".join(f"L={L}: {v:.4g}" for L, v in per_level.items())
    )
    return report


# ---------------------------------------------------------------------------
# Semigroup and embedding (report-only)
# ---------------------------------------------------------------------------


def resolving_n_t(F: SpectralField2D, T_window: float, minimum: int = 16) -> int:
    """Power-of-two time lattice whose tau range covers the phase rates of F with margin."""
    w = F.grid.wave_vector()
    active = np.abs(F.coeffs) > 0
    omega = float(np.abs(w.dispersion[active]).max()) if active.any() else 0.0
    d_tau = 2.0 * math.pi / T_window
    # 16 extra tau cells for the spread of the window's transform
    needed = 2.0 * (omega / d_tau + 16.0)
    n_t = minimum
    while n_t < needed:
        n_t *= 2
    return n_t


def semigroup_probe(p: ProbeParams, b: float = SEMIGROUP_B) -> ProbeReport:
    """
    ||psi(t) W(t) f||_{X^{sigma,s,b}} / ||f||_{G^{sigma,s}} at two resolutions.

    The coarse run uses a 2*band-mode grid and a time lattice resolving the phase
    rates; the fine run doubles both. Random f are band-limited, so both runs see
    the same function.
    """
    coarse_grid = Grid2D.create(max(8, 2 * p.band), L_x=p.box)
    xsb = BourgainParams(sigma=p.sigma, s=p.s, b=b)
    gevrey = GevreyParams(sigma=p.sigma, s=p.s)
    ratios: List[float] = []
    drift: List[float] = []
    for trial in range(p.trials):
        f = random_field(coarse_grid, trial_rng(p.seed, trial), p.taper, degree=2)
        n_t = resolving_n_t(f, p.t_window, p.n_t)
        denominator = gevrey_norm(f, gevrey)
        coarse = xsb_norm(space_time_from_free(f, n_t, p.t_window), xsb) / denominator
        fine = xsb_norm(space_time_from_free(refine(f, 2), 2 * n_t, p.t_window), xsb)
        ratios.append(coarse)
        drift.append(fine / denominator / coarse)
    report = summarize(
        "semigroup",
        ratios,
        params={"sigma": p.sigma, "s": p.s, "b": b, "band": p.band, "trials": p.trials},
    )
    report.stability_factor = max(max(d, 1.0 / d) for d in drift)
    report.stable = _within_limit(report.stability_factor, SEMIGROUP_DRIFT_LIMIT)
    return report


def _gevrey_norm_centred(coeffs: np.ndarray, grid: Grid2D, sigma: float, s: float) -> float:
    xi = (np.arange(coeffs.shape[0]) - coeffs.shape[0] // 2) * grid.d_xi
    eta = (np.arange(coeffs.shape[1]) - coeffs.shape[1] // 2) * grid.d_eta
    l1 = np.abs(xi)[:, None] + np.abs(eta)[None, :]
    bracket = np.sqrt(1.0 + xi[:, None] ** 2 + eta[None, :] ** 2)
    weight = np.exp(sigma * l1) * bracket**s
    return float(np.sqrt(np.sum((weight * np.abs(coeffs)) ** 2) * grid.area_weight))


def embedding_ratio(u: SpaceTimeField, sigma: float, s: float, b: float) -> Optional[float]:
    """sup_t ||u(t)||_{G^{sigma,s}} / ||u||_{X^{sigma,s,b}}; None for a zero field."""
    denominator = xsb_norm(u, BourgainParams(sigma=sigma, s=s, b=b))
    if denominator == 0.0:
        return None
    slices = spatial_slices(u)
    sup = max(
        _gevrey_norm_centred(slices[:, :, j], u.grid, sigma, s) for j in range(slices.shape[2])
    )
    return sup / denominator


def embedding_probe(p: ProbeParams, b: float = SEMIGROUP_B) -> ProbeReport:
    """
    sup_t ||u(t)||_{G^{sigma,s}} <= C ||u||_{X^{sigma,s,b}} for b > 1/2 on random fields.

    Raises:
        DomainError: If b <= 1/2
    """
    if b <= 0.5:
        raise DomainError(f"the embedding needs b > 1/2, got {b}")

    def run(band: int) -> Tuple[List[float], int]:
        values: List[float] = []
        skipped = 0
        for trial in range(p.trials):
            u = _random_factor(p, band, trial_rng(p.seed, trial))
            ratio = embedding_ratio(u, p.sigma, p.s, b)
            if ratio is None:
                skipped += 1
            else:
                values.append(ratio)
        return values, skipped

    ratios, skipped = run(p.band)
    doubled, _ = run(2 * p.band)
    report = summarize(
        "embedding",
        ratios,
        params={"sigma": p.sigma, "s": p.s, "b": b, "band": p.band, "trials": p.trials},
        skipped=skipped,
    )
    report.stability_factor = stability_factor(report.max_ratio, max(doubled, default=0.0))
    report.stable = _within_limit(report.stability_factor)
    return report
