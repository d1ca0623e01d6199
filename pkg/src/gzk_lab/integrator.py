"""Integrating-factor RK4 time stepping, trajectories and checkpoint files."""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy import fft as sfft
from scipy import optimize

from .dynamics import (
    CoordinateMap,
    EquationSpec,
    coordinate_map_apply,
    line_soliton,
    linear_symbol,
    nonlinear_term,
)
from .errors import BlowUpError, ConfigError, DomainError
from .spectral import (
    Grid2D,
    SpectralField2D,
    dealias,
    dealias_mask,
    evaluate_at,
    forward_transform,
    translate,
)

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "gzk-lab/checkpoint/v1"

# Largest phase rotation per step the grid is allowed to see, in radians
RESOLVABLE_PHASE = 1e3

# dt * |N(u)|_max / |u|_max at t=0
NONLINEAR_STAGE_LIMIT = 0.5

NOISE_FLOOR_RATIO = 1e-10

DiagnosticHook = Callable[[SpectralField2D], Any]


class IntegratorConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float = Field(default=1e-3, gt=0)
    t_end: float = Field(default=1.0, ge=0)
    safety: float = Field(default=1.0, gt=0, le=1)
    diag_stride: int = Field(default=10, ge=1)
    checkpoint_stride: int = Field(default=0, ge=0)


@dataclass(frozen=True)
class StepReport:
    t: float
    max_coeff: float
    noise_floor: float
    nan_flag: bool = False
    resolution_warning: bool = False


@dataclass
class Trajectory:
    """Everything evolve produced, kept even when the run blows up."""

    spec: EquationSpec
    config: IntegratorConfig
    reports: List[StepReport] = field(default_factory=list)
    checkpoints: Dict[float, SpectralField2D] = field(default_factory=dict)
    records: List[Any] = field(default_factory=list)
    final: Optional[SpectralField2D] = None
    status: Literal["running", "complete", "blow_up"] = "running"
    error: Optional[str] = None

    @property
    def times(self) -> List[float]:
        return sorted(self.checkpoints)


def _phase(F: SpectralField2D, spec: EquationSpec, t: float) -> np.ndarray:
    """e^{t*symbol} as cos + i sin of the real phase rate."""
    omega = (linear_symbol(spec, F.grid.wave_vector()) / 1j).real
    return np.cos(t * omega) + 1j * np.sin(t * omega)


def linear_propagator(
    F: SpectralField2D, t: float, spec: Optional[EquationSpec] = None
) -> SpectralField2D:
    """
    Free flow W(t): coefficients times e^{it(xi^3 + eta^3)}.

    Args:
        F: Field at time F.time_tag
        t: Duration (may be negative)
        spec: Selects the original-form symbol xi(xi^2 + eta^2) when form='original'

    Returns:
        Field at time F.time_tag + t
    """
    spec = spec or EquationSpec()
    out = F.with_coeffs(F.coeffs * _phase(F, spec, t))
    return out.at_time(F.time_tag + t)


def _top_octave(grid: Grid2D, degree: int) -> np.ndarray:
    retained = dealias_mask(grid, degree)
    m_x, m_y = grid.mode_indices()
    ratio = np.maximum(np.abs(m_x) / (grid.n_x / 2), np.abs(m_y) / (grid.n_y / 2))
    band = ratio[retained].max() if retained.any() else 0.0
    return retained & (ratio > 0.5 * band)


def step_report(F: SpectralField2D, spec: EquationSpec) -> StepReport:
    magnitude = np.abs(F.coeffs)
    finite = bool(np.all(np.isfinite(magnitude)))
    max_coeff = float(magnitude.max()) if finite else math.inf
    octave = magnitude[_top_octave(F.grid, spec.degree)]
    noise_floor = float(np.median(octave)) if octave.size and finite else 0.0
    return StepReport(
        t=F.time_tag,
        max_coeff=max_coeff,
        noise_floor=noise_floor,
        nan_flag=not finite,
        resolution_warning=finite and noise_floor > NOISE_FLOOR_RATIO * max_coeff,
    )


def step_ifrk4(
    F: SpectralField2D, spec: EquationSpec, dt: float
) -> Tuple[SpectralField2D, StepReport]:
    """
    One classical RK4 step on v = W(-t)u, written back in u.

    Args:
        F: Dealiased field
        spec: Equation
        dt: Step size

    Returns:
        Tuple of (field at F.time_tag + dt, StepReport)

    Raises:
        BlowUpError: If any stage produces NaN/Inf; last_good is F
    """
    half = _phase(F, spec, 0.5 * dt)
    full = half * half
    u = F.coeffs

    def stage(coeffs: np.ndarray) -> np.ndarray:
        return nonlinear_term(F.with_coeffs(coeffs), spec).coeffs

    try:
        k1 = stage(u)
        k2 = stage(half * (u + 0.5 * dt * k1))
        k3 = stage(half * u + 0.5 * dt * k2)
        k4 = stage(full * u + dt * half * k3)
    except BlowUpError as e:
        raise BlowUpError(str(e), F.time_tag, last_good=F) from e

    coeffs = full * u + (dt / 6.0) * (full * k1 + 2.0 * half * (k2 + k3) + k4)
    out = dealias(F.with_coeffs(coeffs), spec.degree).at_time(F.time_tag + dt)
    report = step_report(out, spec)
    if report.nan_flag:
        message = f"non-finite coefficients after step to t={out.time_tag}"
        raise BlowUpError(message, F.time_tag, F)
    return out, report


def check_time_step(u0: SpectralField2D, spec: EquationSpec, cfg: IntegratorConfig) -> None:
    """
    Raises:
        ConfigError: If dt breaks the resolvability or nonlinear-stage guard
    """
    omega = np.abs(linear_symbol(spec, u0.grid.wave_vector()))
    omega_max = float(omega.max())
    limit = cfg.safety * RESOLVABLE_PHASE / omega_max if omega_max > 0 else math.inf
    if cfg.dt > limit:
        raise ConfigError(
            f"integrator.dt={cfg.dt} exceeds the resolvability limit {limit:.3g} "
            f"(max phase rate {omega_max:.3g})"
        )
    u_max = float(np.abs(u0.coeffs).max())
    if u_max == 0.0:
        return
    rate = float(np.abs(nonlinear_term(u0, spec).coeffs).max()) / u_max
    if cfg.dt * rate > NONLINEAR_STAGE_LIMIT * cfg.safety:
        raise ConfigError(
            f"integrator.dt={cfg.dt} gives nonlinear stage size {cfg.dt * rate:.3g} > "
            f"{NONLINEAR_STAGE_LIMIT * cfg.safety:.3g}; reduce dt or the data amplitude"
        )


def _run_hooks(
    F: SpectralField2D, hooks: Sequence[DiagnosticHook], trajectory: Trajectory
) -> None:
    for hook in hooks:
        record = hook(F)
        if record is not None:
            trajectory.records.append(record)


def evolve(
    u0: SpectralField2D,
    spec: EquationSpec,
    cfg: IntegratorConfig,
    hooks: Sequence[DiagnosticHook] = (),
) -> Trajectory:
    """
    Step u0 from its time tag to t_end, calling the hooks at the start, every
    diag_stride steps and at the end.

    t_end is an absolute time. The last step is shortened so the run lands on t_end exactly.

    Args:
        u0: Initial field (dealiased here for the equation's degree)
        spec: Equation
        cfg: Step size, horizon and strides
        hooks: Diagnostic callbacks; non-None return values are appended to records

    Returns:
        Trajectory with status 'complete'

    Raises:
        ConfigError: If dt fails a guard or t_end precedes the time tag of u0
        BlowUpError: On NaN/Inf; its trajectory attribute holds everything up to the failure
    """
    state = dealias(u0, spec.degree)
    check_time_step(state, spec, cfg)
    t0 = state.time_tag
    horizon = cfg.t_end - t0
    if horizon < -1e-12:
        raise ConfigError(f"t_end={cfg.t_end} lies before the initial time {t0}")
    n_steps = int(math.ceil(horizon / cfg.dt - 1e-9)) if horizon > 0 else 0

    trajectory = Trajectory(spec=spec, config=cfg)
    trajectory.checkpoints[state.time_tag] = state
    trajectory.reports.append(step_report(state, spec))
    _run_hooks(state, hooks, trajectory)
    logger.info(
        f"evolve: k={spec.k} mu={spec.mu} form={spec.form} grid={state.grid.shape} "
        f"dt={cfg.dt} steps={n_steps}"
    )
    warned = False
    for j in range(1, n_steps + 1):
        dt = cfg.dt if j < n_steps else horizon - (n_steps - 1) * cfg.dt
        try:
            state, report = step_ifrk4(state, spec, dt)
        except BlowUpError as e:
            trajectory.status = "blow_up"
            trajectory.error = str(e)
            trajectory.final = e.last_good
            logger.error(f"blow-up after {j - 1} steps: {e}")
            raise BlowUpError(str(e), e.time_tag, e.last_good, trajectory) from e
        state = state.at_time(t0 + (j - 1) * cfg.dt + dt)
        trajectory.reports.append(report)
        if report.resolution_warning and not warned:
            logger.warning(
                f"t={report.t:.4g}: top-octave noise floor {report.noise_floor:.3e} exceeds "
                f"{NOISE_FLOOR_RATIO:g} * max coefficient; the run may be under-resolved"
            )
            warned = True
        if j % cfg.diag_stride == 0 or j == n_steps:
            _run_hooks(state, hooks, trajectory)
        if (cfg.checkpoint_stride and j % cfg.checkpoint_stride == 0) or j == n_steps:
            trajectory.checkpoints[state.time_tag] = state

    trajectory.final = state
    trajectory.status = "complete"
    return trajectory


# ---------------------------------------------------------------------------
# Checkpoint files
# ---------------------------------------------------------------------------


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def save_checkpoint(F: SpectralField2D, spec: EquationSpec, path: Union[str, Path]) -> List[Path]:
    """
    Write the mode table (m_x, m_y, re, im) as CSV plus a JSON sidecar.

    Returns:
        The two paths written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    m_x, m_y = F.grid.mode_indices()
    table = pd.DataFrame(
        {
            "m_x": m_x.ravel(),
            "m_y": m_y.ravel(),
            "re": F.coeffs.real.ravel(),
            "im": F.coeffs.imag.ravel(),
        }
    )
    with open(path, "w") as f:
        f.write(f"# schema: {CHECKPOINT_FORMAT}\n")
        table.to_csv(f, index=False, float_format="%.17g")
    sidecar = _sidecar_path(path)
    meta = {
        "format": CHECKPOINT_FORMAT,
        "grid": F.grid.model_dump(),
        "spec": spec.model_dump(),
        "t": F.time_tag,
    }
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return [path, sidecar]


def load_checkpoint(path: Union[str, Path]) -> Tuple[SpectralField2D, EquationSpec]:
    """
    Raises:
        ConfigError: If the sidecar format tag or the mode table does not match
    """
    path = Path(path)
    meta = json.loads(_sidecar_path(path).read_text())
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"{path}: unsupported checkpoint format {meta.get('format')!r}")
    grid = Grid2D(**meta["grid"])
    spec = EquationSpec(**meta["spec"])
    table = pd.read_csv(path, comment="#")
    if len(table) != grid.n_x * grid.n_y:
        raise ConfigError(f"{path}: {len(table)} modes for a {grid.shape} grid")
    coeffs = np.zeros(grid.shape, dtype=complex)
    ix = table["m_x"].to_numpy() % grid.n_x
    iy = table["m_y"].to_numpy() % grid.n_y
    coeffs[ix, iy] = table["re"].to_numpy() + 1j * table["im"].to_numpy()
    return SpectralField2D(grid, coeffs, float(meta["t"])), spec


# ---------------------------------------------------------------------------
# Exact-solution checks
# ---------------------------------------------------------------------------


def _relative_error(F: SpectralField2D, exact: SpectralField2D) -> float:
    scale = float(np.sqrt(np.sum(np.abs(exact.coeffs) ** 2)))
    return float(np.sqrt(np.sum(np.abs(F.coeffs - exact.coeffs) ** 2))) / scale


def soliton_shape_error(
    F: SpectralField2D, spec: EquationSpec, K: float, x0: float, t: Optional[float] = None
) -> Tuple[float, float]:
    """
    Relative L^2 distance to the exact line soliton after removing the phase drift.

    The shift is located at the cross-correlation peak on the lattice and refined
    continuously with a bounded scalar minimisation.

    Returns:
        Tuple of (relative error, recovered shift along x)
    """
    t = F.time_tag if t is None else t
    exact = line_soliton(F.grid, spec, K, x0, t)
    grid = F.grid
    correlation = sfft.ifft(np.sum(F.coeffs * np.conj(exact.coeffs), axis=1)).real
    index = int(np.argmax(correlation))
    spacing = grid.L_x / grid.n_x
    coarse = index * spacing
    if coarse > grid.L_x / 2:
        coarse -= grid.L_x

    def misfit(shift: float) -> float:
        return _relative_error(translate(F, (-shift, 0.0)), exact)

    result = optimize.minimize_scalar(
        misfit,
        bounds=(coarse - spacing, coarse + spacing),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(result.fun), float(result.x)


def cross_validate_forms(
    u0_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    grid_original: Grid2D,
    grid_symmetrized: Grid2D,
    spec: EquationSpec,
    cfg: IntegratorConfig,
    probe_radius: float = 2.0,
    n_probe: int = 5,
) -> float:
    """
    Evolve the original form from u0 and the symmetrized form from u0 after the change
    of variables, then compare both at matching points.

    Both data are centred in their boxes. The symmetrized variable at p' = M p equals the
    original variable at p.

    Args:
        u0_fn: Initial data as a function of coordinates relative to the box centre
        grid_original: Grid of the original form
        grid_symmetrized: Grid of the symmetrized form
        spec: Equation (its form is overridden for each run)
        cfg: Integrator settings shared by both runs
        probe_radius: Half-width of the square of comparison points around the centre
        n_probe: Comparison points per axis

    Returns:
        max |u - v| / max |u| over the comparison points
    """
    if probe_radius <= 0 or n_probe < 1:
        raise DomainError("probe_radius must be positive and n_probe >= 1")
    mapping = CoordinateMap.standard()

    x, y = grid_original.coordinates()
    c_o = np.array([grid_original.L_x / 2, grid_original.L_y / 2])
    u0 = forward_transform(u0_fn(x - c_o[0], y - c_o[1]), grid_original)

    xs, ys = grid_symmetrized.coordinates()
    c_s = np.array([grid_symmetrized.L_x / 2, grid_symmetrized.L_y / 2])
    rel = np.stack([(xs - c_s[0]).ravel(), (ys - c_s[1]).ravel()], axis=1)
    back = coordinate_map_apply(rel, mapping, "inv")
    v0_samples = u0_fn(back[:, 0], back[:, 1]).reshape(grid_symmetrized.shape)
    v0 = forward_transform(v0_samples, grid_symmetrized)

    original = evolve(u0, spec.model_copy(update={"form": "original"}), cfg).final
    symmetrized = evolve(v0, spec.model_copy(update={"form": "symmetrized"}), cfg).final
    assert original is not None and symmetrized is not None

    offsets = np.linspace(-probe_radius, probe_radius, n_probe)
    px, py = np.meshgrid(offsets, offsets, indexing="ij")
    points = np.stack([px.ravel(), py.ravel()], axis=1)
    u = evaluate_at(original, points + c_o)
    v = evaluate_at(symmetrized, coordinate_map_apply(points, mapping, "fwd") + c_s)
    scale = float(np.max(np.abs(u)))
    if scale == 0.0:
        raise DomainError("initial data vanishes at every comparison point")
    error = float(np.max(np.abs(u - v))) / scale
    logger.info(f"cross_validate_forms: max relative difference {error:.3e}")
    return error
