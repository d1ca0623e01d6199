"""
sigma-scaling probes: the commutator terms F(U), G(U) and the growth of the
almost-conserved M_sigma, E_sigma along short simulations.
"""

import logging
import math
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..dynamics import EquationSpec, commutator_F, commutator_G
from ..errors import DomainError
from ..functionals import E_sigma, M_sigma, mass
from ..integrator import IntegratorConfig, evolve
from ..spectral import Grid2D, SpectralField2D, random_field
from .report import ProbeParams, ProbeReport, stability_factor, summarize, trial_rng

logger = logging.getLogger(__name__)

SLOPE_TOLERANCE = 0.05

# Normalized deviations at amplitude A and 2A may differ by at most this factor
AMPLITUDE_LIMIT = 8.0

PROBE_MODES = 32

# Deviations below this fraction of Q(0) are roundoff
ZERO_DEVIATION = 1e-13


def _probe_grid(p: ProbeParams, grid: Optional[Grid2D]) -> Grid2D:
    return grid or Grid2D.create(PROBE_MODES, L_x=p.box)


def _check_sigma_span(sigmas: Sequence[float]) -> None:
    if len(sigmas) < 2 or max(sigmas) / min(sigmas) < 100.0:
        raise DomainError(f"sigma_list must span at least two decades, got {list(sigmas)}")


def _loglog_slope(sigmas: Sequence[float], values: Sequence[float]) -> Optional[float]:
    """Slope of log(value) against log(sigma) over the positive values, None if under two."""
    pairs = [(s, v) for s, v in zip(sigmas, values) if v > 0 and math.isfinite(v)]
    if len(pairs) < 2:
        return None
    x, y = np.log(np.array(pairs)).T
    return float(stats.linregress(x, y).slope)


def commutator_norms(
    U: SpectralField2D, sigmas: Sequence[float], spec: EquationSpec
) -> List[float]:
    """L^2 norm of F(U) (k=1) or G(U) (k=2) for each sigma."""
    commutator = commutator_F if spec.k == 1 else commutator_G
    return [math.sqrt(mass(commutator(U, sigma, spec))) for sigma in sigmas]


def commutator_scaling_probe(
    kind: Literal["F", "G"],
    p: ProbeParams,
    grid: Optional[Grid2D] = None,
    U: Optional[SpectralField2D] = None,
) -> ProbeReport:
    """
    Fit the sigma-slope of ||F(U)|| (kind F, ZK) or ||G(U)|| (kind G, mZK) on a fixed smooth U.

    The spatial L^2 norm of the commutator stands in for the X^{0,b} norms of the
    bound. Passes when the slope is at least theta - 0.05 (F) or alpha - 0.05 (G).

    Args:
        kind: "F" or "G"
        p: sigma_list, theta/alpha and seed
        grid: Grid for the random U (defaults to 32 modes on the probe box)
        U: Explicit field instead of the random one

    Raises:
        DomainError: If U is zero or sigma_list spans less than two decades
    """
    if kind not in ("F", "G"):
        raise DomainError(f"commutator kind must be F or G, got {kind}")
    _check_sigma_span(p.sigma_list)
    spec = EquationSpec(k=1 if kind == "F" else 2, mu=1)
    if U is None:
        U = random_field(_probe_grid(p, grid), trial_rng(p.seed, 0), taper=4.0, degree=spec.degree)
    if mass(U) == 0.0:
        raise DomainError("commutator probe needs a nonzero field U")

    norms = commutator_norms(U, p.sigma_list, spec)
    exponent = p.theta if kind == "F" else p.alpha
    slope = _loglog_slope(p.sigma_list, norms)
    scale = math.sqrt(mass(U)) ** spec.degree
    report = summarize(
        f"commutator_{kind}",
        [n / (sigma**exponent * scale) for sigma, n in zip(p.sigma_list, norms)],
        params={"kind": kind, "sigma_list": list(p.sigma_list), "exponent": exponent},
    )
    report.slope = slope
    report.passed = slope is not None and slope >= exponent - SLOPE_TOLERANCE
    report.notes.append(
        "norms: " + ", ".join(f"{s:g}: {n:.4e}" for s, n in zip(p.sigma_list, norms))
    )
    logger.info(f"commutator {kind}: slope {slope} against exponent {exponent}")
    return report


def _default_spec(kind: str) -> EquationSpec:
    if kind == "M":
        return EquationSpec(k=1, mu=1)
    return EquationSpec(k=2, mu=-1)


def _deviations(
    kind: str,
    u0: SpectralField2D,
    spec: EquationSpec,
    cfg: IntegratorConfig,
    sigmas: Sequence[float],
) -> Tuple[Dict[float, float], Dict[float, float]]:
    """
    Evolve u0 and record Q_sigma at every diagnostic stride.

    Returns:
        Tuple of (Q_sigma(0) per sigma, sup_t |Q_sigma(t) - Q_sigma(0)| per sigma)
    """
    all_sigmas = [0.0, *sigmas]
    history: List[Dict[float, float]] = []

    def record(F: SpectralField2D) -> None:
        if kind == "M":
            history.append({s: M_sigma(F, s) for s in all_sigmas})
        else:
            history.append({s: E_sigma(F, s, spec) for s in all_sigmas})

    evolve(u0, spec, cfg, hooks=[record])
    initial = history[0]
    deviation = {s: max(abs(row[s] - initial[s]) for row in history) for s in all_sigmas}
    return initial, deviation


def _normalizer(kind: str, q0: float) -> float:
    return q0**1.5 if kind == "M" else q0**2 * (1.0 + q0)


def almost_conservation_probe(
    kind: Literal["M", "E"],
    p: ProbeParams,
    spec: Optional[EquationSpec] = None,
    cfg: Optional[IntegratorConfig] = None,
    grid: Optional[Grid2D] = None,
    amplitude: float = 0.5,
    t_short: float = 0.5,
) -> ProbeReport:
    """
    Growth of M_sigma (ZK) or E_sigma (symmetrized mZK) over a short run, per sigma.

    Records sup_t |Q_sigma(t) - Q_sigma(0)| and fits its sigma-slope, which must be at
    least theta - 0.05 (M) or alpha - 0.05 (E). The run is repeated at twice the
    amplitude; deviations normalized by M_sigma(0)^{3/2} or E_sigma(0)^2 (1 + E_sigma(0))
    must agree within a factor of 8. A linear flow passes only if no
    sigma deviates beyond roundoff.

    Args:
        kind: "M" or "E"
        p: sigma_list, theta/alpha and seed of the random data
        spec: Equation (defaults to focusing ZK for M, defocusing symmetrized mZK for E)
        cfg: Integrator settings (defaults to dt=1e-3 up to t_short, diagnostics every step)
        grid: Grid (defaults to 32 modes on the probe box)
        amplitude: Max |u0| of the first run
        t_short: Horizon when cfg is not given

    Raises:
        DomainError: If sigma_list spans less than two decades
        SpecMismatchError: If kind is E and spec is not symmetrized k=2
        BlowUpError: Propagated from evolve
    """
    if kind not in ("M", "E"):
        raise DomainError(f"almost-conservation kind must be M or E, got {kind}")
    _check_sigma_span(p.sigma_list)
    spec = spec or _default_spec(kind)
    cfg = cfg or IntegratorConfig(dt=1e-3, t_end=t_short, diag_stride=1)
    grid = _probe_grid(p, grid)
    exponent = p.theta if kind == "M" else p.alpha
    sigmas = list(p.sigma_list)

    base = random_field(grid, trial_rng(p.seed, 0), taper=4.0, degree=spec.degree)
    runs = []
    for scale in (1.0, 2.0):
        runs.append(_deviations(kind, base.scale(amplitude * scale), spec, cfg, sigmas))
    (q0, dev), (q0_double, dev_double) = runs

    significant = [s for s in sigmas if dev[s] > ZERO_DEVIATION * abs(q0[s])]
    ratios = [dev[s] / (s**exponent * _normalizer(kind, q0[s])) for s in significant]
    report = summarize(
        f"almost_conservation_{kind}",
        ratios,
        params={
            "kind": kind,
            "k": spec.k,
            "mu": spec.mu,
            "form": spec.form,
            "nonlinear": spec.nonlinear,
            "sigma_list": sigmas,
            "exponent": exponent,
            "amplitude": amplitude,
            "t_end": cfg.t_end,
            "dt": cfg.dt,
            "drift_at_zero": dev[0.0] / abs(q0[0.0]) if q0[0.0] else dev[0.0],
        },
    )
    report.notes.append(
        "deviations: " + ", ".join(f"{s:g}: {dev[s]:.4e}" for s in [0.0, *sigmas])
    )

    if spec.effective_mu == 0:
        drift = max(dev[s] / abs(q0[s]) if q0[s] else dev[s] for s in [0.0, *sigmas])
        report.slope = None
        report.passed = drift <= ZERO_DEVIATION
        report.notes.append(f"linear flow: largest relative deviation {drift:.3e}")
        return report

    if len(significant) < 2:
        report.slope = None
        report.passed = False
        report.notes.append("fewer than two sigma values grew above roundoff")
        return report

    report.slope = _loglog_slope(significant, [dev[s] for s in significant])
    factors = [
        stability_factor(
            dev[s] / _normalizer(kind, q0[s]), dev_double[s] / _normalizer(kind, q0_double[s])
        )
        for s in significant
    ]
    finite = [f for f in factors if f is not None]
    report.stability_factor = max(finite) if finite else None
    report.stable = report.stability_factor is not None and (
        report.stability_factor <= AMPLITUDE_LIMIT
    )
    report.passed = (
        report.slope is not None and report.slope >= exponent - SLOPE_TOLERANCE and report.stable
    )
    logger.info(
        f"almost conservation {kind}: slope {report.slope:.4f}, amplitude factor "
        f"{report.stability_factor}"
    )
    return report
