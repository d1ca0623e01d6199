"""
Commands behind the CLI: simulate, radius-track, probe and sweep.

Each command owns one output directory, writes its tables and reports there, and
closes with a manifest. The return value is the process exit status.
"""

import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from .analyticity import (
    BoundCurve,
    ContinuationLedger,
    RadiusEstimate,
    build_mzk_ledger,
    build_zk_ledger,
    bound_curve_eval,
    estimate_radius,
    fit_decay_exponent,
)
from .config import settings
from .errors import BlowUpError, ConfigError, DomainError, LabError
from .functionals import DiagnosticsRecord, E_sigma, M_sigma, diagnostics_record
from .initial_data import build_initial_data
from .integrator import (
    IntegratorConfig,
    Trajectory,
    check_time_step,
    evolve,
    save_checkpoint,
    soliton_shape_error,
)
from .persistence import (
    RunRecorder,
    prepare_output_dir,
    read_table,
    write_json,
    write_table,
)
from .probes.growth import almost_conservation_probe, commutator_scaling_probe
from .probes.multilinear import (
    bilinear_probe,
    embedding_probe,
    semigroup_probe,
    strichartz_QL_probe,
    trilinear_probe,
)
from .probes.report import ProbeReport
from .probes.scalar import exp_minus_one_check, kernel_bound_probe, min_exp_inequality_check
from .runconfig import (
    RunConfig,
    SolitonData,
    check_key,
    config_hash,
    serialize_config,
    with_override,
)
from .spectral import SpectralField2D, dealias

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

SCALAR_ALPHAS = (0.0, 0.3, 0.75, 1.0)
STRICHARTZ_EXPONENTS = (4.0, 8.0)

# Horizon of the almost-conservation runs started from the probe command
ALMOST_CONSERVATION_T = 0.5


def _start(cfg: RunConfig, command: str, force: bool) -> RunRecorder:
    out = prepare_output_dir(cfg.output_dir, force)
    recorder = RunRecorder(out, command, config_hash(cfg))
    config_path = out / "config.ini"
    config_path.write_text(serialize_config(cfg))
    recorder.add(config_path)
    logger.info(f"{command}: writing to {out}")
    return recorder


def _initial_field(cfg: RunConfig) -> SpectralField2D:
    """Dealiased initial data, after the dt guards have been checked."""
    u0 = build_initial_data(cfg.initial_data, cfg.grid, cfg.equation, cfg.run.seed)
    u0 = dealias(u0, cfg.equation.degree)
    check_time_step(u0, cfg.equation, cfg.integrator)
    return u0


def _run(
    cfg: RunConfig, u0: SpectralField2D, hook: Callable[[SpectralField2D], Any]
) -> Tuple[Trajectory, Optional[BlowUpError]]:
    try:
        return evolve(u0, cfg.equation, cfg.integrator, hooks=[hook]), None
    except BlowUpError as e:
        if e.trajectory is None:
            raise
        return e.trajectory, e


def _write_checkpoints(trajectory: Trajectory, recorder: RunRecorder) -> None:
    directory = recorder.out_dir / "checkpoints"
    for t, field in sorted(trajectory.checkpoints.items()):
        recorder.add(*save_checkpoint(field, trajectory.spec, directory / f"u_t{t:.6f}.csv"))


def _relative_drift(first: float, last: float) -> Optional[float]:
    return abs(last - first) / abs(first) if first else None


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig, force: bool = False) -> int:
    """
    Evolve the configured data and write diagnostics, radius series, checkpoints,
    a summary and the manifest.

    Returns:
        0 on completion, 1 on blow-up (partial outputs are kept)

    Raises:
        ConfigError: On invalid data, a failed dt guard or an existing output dir
    """
    u0 = _initial_field(cfg)
    recorder = _start(cfg, "simulate", force)
    sigmas = list(cfg.gevrey.sigma_list)
    pairs = [(sigma, cfg.gevrey.s) for sigma in sigmas]

    def record(F: SpectralField2D) -> DiagnosticsRecord:
        return diagnostics_record(
            F, cfg.equation, sigmas, pairs, cfg.radius, cfg.gevrey.track_radius
        )

    trajectory, failure = _run(cfg, u0, record)
    records: List[DiagnosticsRecord] = trajectory.records

    rows = [r.to_row() for r in records]
    diagnostics = recorder.out_dir / "diagnostics.csv"
    recorder.add(write_table(pd.DataFrame(rows), diagnostics, "diagnostics"))
    radius_rows = [
        {"t": r.t, **r.radius_estimate.model_dump(exclude={"window"})}
        for r in records
        if r.radius_estimate is not None
    ]
    if radius_rows:
        recorder.add(
            write_table(pd.DataFrame(radius_rows), recorder.out_dir / "radius.csv", "radius")
        )
    _write_checkpoints(trajectory, recorder)

    summary: Dict[str, Any] = {
        "status": trajectory.status,
        "error": trajectory.error,
        "t_final": trajectory.final.time_tag if trajectory.final is not None else None,
        "steps": len(trajectory.reports) - 1,
        "records": len(records),
    }
    if records:
        summary["mass_drift"] = _relative_drift(records[0].mass, records[-1].mass)
        summary["energy_drift"] = _relative_drift(records[0].energy, records[-1].energy)
    if failure is None and isinstance(cfg.initial_data, SolitonData):
        x0 = cfg.grid.L_x / 2 if cfg.initial_data.x0 is None else cfg.initial_data.x0
        error, shift = soliton_shape_error(
            trajectory.final, cfg.equation, cfg.initial_data.K, x0  # type: ignore[arg-type]
        )
        summary["soliton_shape_error"] = error
        summary["soliton_shift"] = shift
        logger.info(f"soliton shape error {error:.3e} after shift {shift:.3e}")
    recorder.add(write_json(summary, recorder.out_dir / "summary.json"))

    if failure is not None:
        recorder.note(str(failure))
        recorder.finish("blow_up")
        return EXIT_FAILED
    recorder.finish("complete")
    return EXIT_OK


# ---------------------------------------------------------------------------
# radius-track
# ---------------------------------------------------------------------------


def _ledger(
    cfg: RunConfig, u0: SpectralField2D, sigma0: float, T_list: Sequence[float]
) -> Tuple[Optional[ContinuationLedger], Optional[str]]:
    """Ledger for the run's equation, or None with the reason it does not apply."""
    spec = cfg.equation
    try:
        if spec.k == 1:
            return build_zk_ledger(
                M_sigma(u0, sigma0), sigma0, T_list, cfg.ledger.constants("zk")
            ), None
        if spec.form != "symmetrized":
            return None, "mZK ledger needs the symmetrized form"
        return build_mzk_ledger(
            E_sigma(u0, sigma0, spec), sigma0, T_list, cfg.ledger.constants("mzk")
        ), None
    except DomainError as e:
        return None, str(e)


def _ledger_sigma(ledger: Optional[ContinuationLedger], T: float, column: str) -> float:
    if ledger is None:
        return math.nan
    for row in ledger.rows:
        if row.T == T:
            return float(getattr(row, column))
    return math.nan


def cmd_radius_track(cfg: RunConfig, force: bool = False) -> int:
    """
    Track sigma_hat(T) along a run and compare it with the lower-bound curves and the
    continuation ledger.

    Writes radius_track.csv (T, sigma_hat, bound_zk, bound_mzk, ledger_sigma_star,
    ledger_sigma) with a decay-fit footer, and ledger.json for the configured horizons.

    Returns:
        0 on completion, 1 on blow-up
    """
    u0 = _initial_field(cfg)
    recorder = _start(cfg, "radius-track", force)
    fit_cfg = cfg.radius

    def record(F: SpectralField2D) -> Tuple[float, RadiusEstimate]:
        return F.time_tag, estimate_radius(F, fit_cfg)

    trajectory, failure = _run(cfg, u0, record)
    series: List[Tuple[float, RadiusEstimate]] = trajectory.records
    sigma0 = series[0][1].sigma_hat
    tracked = [(t, est) for t, est in series if t > 0]
    times = [t for t, _ in tracked]

    ledger, reason = _ledger(cfg, u0, sigma0, times) if times else (None, "no tracked times")
    config_ledger, _ = _ledger(cfg, u0, sigma0, cfg.ledger.T_list)
    T0 = ledger.T0 if ledger is not None else 0.0
    zk_curve = BoundCurve(
        kind="ZK_minus4_eps", c=cfg.ledger.bound_c, eps=cfg.ledger.bound_eps, sigma0=sigma0, T0=T0
    )
    mzk_curve = BoundCurve(kind="mZK_minus4_3", c=cfg.ledger.bound_c, sigma0=sigma0, T0=T0)
    table = pd.DataFrame(
        [
            {
                "T": t,
                "sigma_hat": est.sigma_hat,
                "floor_hit": est.floor_hit,
                "bound_zk": bound_curve_eval(zk_curve, t),
                "bound_mzk": bound_curve_eval(mzk_curve, t),
                "ledger_sigma_star": _ledger_sigma(ledger, t, "sigma_star"),
                "ledger_sigma": _ledger_sigma(ledger, t, "sigma"),
            }
            for t, est in tracked
        ],
        columns=[
            "T",
            "sigma_hat",
            "floor_hit",
            "bound_zk",
            "bound_mzk",
            "ledger_sigma_star",
            "ledger_sigma",
        ],
    )
    footer = [f"sigma0: {sigma0!r}"]
    try:
        fit = fit_decay_exponent([(t, est.sigma_hat) for t, est in tracked])
        footer.append(
            f"fit: exponent={fit.exponent!r} prefactor={fit.prefactor!r} "
            f"r_squared={fit.r_squared!r}"
        )
        logger.info(f"radius decay exponent {fit.exponent:.4f} (r^2 {fit.r_squared:.3f})")
    except DomainError as e:
        footer.append(f"fit: unavailable ({e})")
    if reason:
        footer.append(f"ledger: unavailable ({reason})")
    recorder.add(
        write_table(table, recorder.out_dir / "radius_track.csv", "radius-track", footer)
    )
    if config_ledger is not None:
        recorder.add(write_json(config_ledger.model_dump(), recorder.out_dir / "ledger.json"))
    _write_checkpoints(trajectory, recorder)

    if failure is not None:
        recorder.note(str(failure))
        recorder.finish("blow_up")
        return EXIT_FAILED
    recorder.finish("complete")
    return EXIT_OK


# ---------------------------------------------------------------------------
# probe
# ---------------------------------------------------------------------------


def _scalar_suite(cfg: RunConfig) -> List[ProbeReport]:
    p = cfg.probes
    reports = []
    for alpha in SCALAR_ALPHAS:
        report = exp_minus_one_check(alpha, p.samples, p.seed)
        report.name = f"exp_minus_one_alpha{alpha:g}"
        reports.append(report)
    for sigma in p.sigma_list:
        report = min_exp_inequality_check(p.theta, sigma, p.samples, p.seed)
        report.name = f"min_exp_sigma{sigma:g}"
        reports.append(report)
    return reports


def _almost_conservation_suite(cfg: RunConfig) -> List[ProbeReport]:
    spec = cfg.equation
    integrator = IntegratorConfig(
        dt=cfg.integrator.dt, t_end=ALMOST_CONSERVATION_T, diag_stride=1
    )
    reports = []
    m_spec = spec if spec.k == 1 else None
    reports.append(almost_conservation_probe("M", cfg.probes, m_spec, integrator))
    e_spec = spec if spec.k == 2 and spec.form == "symmetrized" else None
    reports.append(almost_conservation_probe("E", cfg.probes, e_spec, integrator))
    return reports


PROBES: Dict[str, Callable[[RunConfig], List[ProbeReport]]] = {
    "scalar": _scalar_suite,
    "bilinear": lambda cfg: [bilinear_probe(cfg.probes)],
    "trilinear": lambda cfg: [trilinear_probe(cfg.probes)],
    "commutator": lambda cfg: [
        commutator_scaling_probe("F", cfg.probes),
        commutator_scaling_probe("G", cfg.probes),
    ],
    "almost_conservation": _almost_conservation_suite,
    "strichartz": lambda cfg: [
        strichartz_QL_probe(p_exp, cfg.probes) for p_exp in STRICHARTZ_EXPONENTS
    ],
    "semigroup": lambda cfg: [semigroup_probe(cfg.probes)],
    "embedding": lambda cfg: [embedding_probe(cfg.probes)],
    "kernel": lambda cfg: [kernel_bound_probe(cfg.probes)],
}


def cmd_probe(cfg: RunConfig, which: str, force: bool = False) -> int:
    """
    Run one probe family and write a JSON report and a ratio CSV per report.

    Returns:
        0 if every hard assertion passed, 1 otherwise

    Raises:
        ConfigError: If the probe name is unknown
    """
    if which not in PROBES:
        raise ConfigError(f"unknown probe '{which}', expected one of {', '.join(PROBES)}")
    reports = PROBES[which](cfg)
    recorder = _start(cfg, f"probe {which}", force)
    for report in reports:
        recorder.add(
            write_json(report.to_json_dict(), recorder.out_dir / f"probe_{report.name}.json")
        )
        ratios = pd.DataFrame({"ratio": report.ratios})
        recorder.add(
            write_table(
                ratios, recorder.out_dir / f"probe_{report.name}_ratios.csv", "probe-ratios"
            )
        )
        if report.stable is False:
            logger.warning(f"{report.name}: flagged unstable ({report.stability_factor})")
    failed = [r.name for r in reports if not r.passed]
    if failed:
        recorder.note(f"failed: {', '.join(failed)}")
        logger.error(f"probe {which}: hard assertions failed in {', '.join(failed)}")
    recorder.finish("failed" if failed else "complete")
    return EXIT_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

COMMANDS: Dict[str, Callable[[RunConfig, bool], int]] = {
    "simulate": cmd_simulate,
    "radius-track": cmd_radius_track,
}

FINAL_TABLES = {"simulate": "diagnostics.csv", "radius-track": "radius_track.csv"}


def _sweep_run(cfg: RunConfig, command: str, force: bool) -> Dict[str, Any]:
    """One sweep point; never raises, so a failure stays with its value."""
    try:
        status = COMMANDS[command](cfg, force)
        _, table = read_table(Path(cfg.output_dir) / FINAL_TABLES[command])
        final = table.iloc[-1].to_dict() if len(table) else {}
        return {"exit_code": status, "final": final, "error": None}
    except LabError as e:
        code = EXIT_USAGE if isinstance(e, (ConfigError, DomainError)) else EXIT_FAILED
        return {"exit_code": code, "final": {}, "error": str(e)}
    except Exception as e:
        logger.error(f"sweep run in {cfg.output_dir} failed: {e}", exc_info=True)
        return {"exit_code": EXIT_FAILED, "final": {}, "error": str(e)}


def _sweep_configs(
    cfg: RunConfig, axis: str, values: Sequence[str], out: Path
) -> List[Tuple[str, Optional[RunConfig], Optional[str]]]:
    runs: List[Tuple[str, Optional[RunConfig], Optional[str]]] = []
    for value in values:
        try:
            point = with_override(cfg, axis, value)
            point = with_override(point, "run.output_dir", str(out / f"{axis}={value}"))
            runs.append((value, point, None))
        except ConfigError as e:
            runs.append((value, None, str(e)))
    return runs


def cmd_sweep(
    cfg: RunConfig,
    axis: str,
    values: Sequence[str],
    command: str = "simulate",
    force: bool = False,
    workers: Optional[int] = None,
) -> int:
    """
    Independent runs of one command per value of a dotted config key.

    Runs go to <output_dir>/<axis>=<value>/ with their own manifests. The aggregate CSV
    holds one row per successful value; failures are listed in sweep_summary.json.

    Args:
        cfg: Base configuration
        axis: Dotted key, e.g. integrator.dt
        values: Values as given on the command line
        command: simulate or radius-track
        force: Allow existing output directories
        workers: Process pool size (defaults to settings.sweep_workers; 1 runs inline)

    Returns:
        0 if every run succeeded, 1 otherwise

    Raises:
        ConfigError: If the command or axis is invalid, or values is empty or repeats
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown sweep command '{command}', expected simulate or radius-track")
    if not values:
        raise ConfigError("sweep needs at least one value")
    duplicates = sorted(value for value, n in Counter(values).items() if n > 1)
    if duplicates:
        raise ConfigError(f"sweep values repeat: {', '.join(duplicates)}")
    check_key(axis)
    recorder = _start(cfg, f"sweep {command} {axis}", force)
    runs = _sweep_configs(cfg, axis, values, recorder.out_dir)
    workers = workers or settings.sweep_workers

    results: Dict[str, Dict[str, Any]] = {}
    ready = [(value, point) for value, point, _ in runs if point is not None]
    if workers <= 1:
        for value, point in ready:
            results[value] = _sweep_run(point, command, force)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                value: pool.submit(_sweep_run, point, command, force) for value, point in ready
            }
            results = {value: future.result() for value, future in futures.items()}
    for value, _, error in runs:
        if error is not None:
            results[value] = {"exit_code": EXIT_USAGE, "final": {}, "error": error}

    rows = []
    failures = []
    for value in values:
        result = results[value]
        if result["exit_code"] == EXIT_OK:
            rows.append({axis: value, "status": "complete", **result["final"]})
        else:
            failures.append({"value": value, **result})
            logger.warning(f"sweep {axis}={value} failed: {result['error']}")
    footer = [f"failed: {axis}={f['value']} ({f['error']})" for f in failures]
    recorder.add(
        write_table(pd.DataFrame(rows), recorder.out_dir / "aggregate.csv", "sweep", footer)
    )
    summary = {
        "axis": axis,
        "command": command,
        "values": list(values),
        "completed": [row[axis] for row in rows],
        "failures": [
            {"value": f["value"], "exit_code": f["exit_code"], "error": f["error"]}
            for f in failures
        ],
    }
    recorder.add(write_json(summary, recorder.out_dir / "sweep_summary.json"))
    recorder.finish("failed" if failures else "complete")
    return EXIT_FAILED if failures else EXIT_OK
