"""
Tests for IF-RK4 stepping, trajectories, checkpoints and exact-solution checks.
"""

import json
import math

import numpy as np
import pytest
from pydantic import ValidationError

from gzk_lab import integrator
from gzk_lab.dynamics import EquationSpec, line_soliton
from gzk_lab.errors import BlowUpError, ConfigError
from gzk_lab.functionals import energy, mass, modified_energy
from gzk_lab.initial_data import gaussian_field
from gzk_lab.integrator import (
    IntegratorConfig,
    check_time_step,
    cross_validate_forms,
    evolve,
    linear_propagator,
    load_checkpoint,
    save_checkpoint,
    soliton_shape_error,
    step_ifrk4,
)
from gzk_lab.spectral import Grid2D, SpectralField2D, dealias

LINEAR = EquationSpec(nonlinear=False)


def _relative(a: SpectralField2D, b: SpectralField2D) -> float:
    return float(np.linalg.norm(a.coeffs - b.coeffs) / np.linalg.norm(b.coeffs))


class TestIntegratorConfig:
    def test_defaults(self):
        cfg = IntegratorConfig()
        assert (cfg.dt, cfg.t_end, cfg.diag_stride, cfg.checkpoint_stride) == (1e-3, 1.0, 10, 0)

    @pytest.mark.parametrize(
        "kwargs", [{"dt": 0.0}, {"t_end": -1.0}, {"safety": 1.5}, {"diag_stride": 0}]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            IntegratorConfig(**kwargs)


class TestLinearFlow:
    """With the nonlinearity off, IF-RK4 reproduces the free propagator."""

    def test_propagator_is_unitary(self, smooth_field):
        moved = linear_propagator(smooth_field, 0.7)
        np.testing.assert_allclose(np.abs(moved.coeffs), np.abs(smooth_field.coeffs), rtol=1e-14)
        assert moved.time_tag == pytest.approx(0.7)

    def test_propagator_group_property(self, smooth_field):
        twice = linear_propagator(linear_propagator(smooth_field, 0.3), 0.4)
        once = linear_propagator(smooth_field, 0.7)
        assert _relative(twice, once) < 1e-13

    def test_evolve_matches_propagator(self, smooth_field):
        cfg = IntegratorConfig(dt=1e-2, t_end=0.5)
        final = evolve(smooth_field, LINEAR, cfg).final
        exact = linear_propagator(dealias(smooth_field, 2), 0.5, LINEAR)
        assert _relative(final, exact) < 1e-12

    def test_mass_drift_over_thousand_steps(self, smooth_field):
        cfg = IntegratorConfig(dt=1e-3, t_end=1.0)
        trajectory = evolve(smooth_field, LINEAR, cfg)
        m0 = mass(dealias(smooth_field, 2))
        assert abs(mass(trajectory.final) - m0) < 1e-12 * m0


class TestEvolve:
    def test_lands_on_t_end(self, smooth_field):
        cfg = IntegratorConfig(dt=1e-3, t_end=0.0105)
        trajectory = evolve(smooth_field, EquationSpec(), cfg)
        assert trajectory.status == "complete"
        assert trajectory.final.time_tag == pytest.approx(0.0105, abs=1e-14)
        assert len(trajectory.reports) == 12

    def test_hook_schedule(self, smooth_field):
        cfg = IntegratorConfig(dt=1e-3, t_end=0.02, diag_stride=5, checkpoint_stride=10)
        trajectory = evolve(smooth_field, EquationSpec(), cfg, hooks=[lambda F: F.time_tag])
        assert trajectory.records == pytest.approx([0.0, 0.005, 0.01, 0.015, 0.02], abs=1e-14)
        assert trajectory.times == pytest.approx([0.0, 0.01, 0.02], abs=1e-14)

    def test_hooks_returning_none_are_skipped(self, smooth_field):
        cfg = IntegratorConfig(dt=1e-3, t_end=0.01)
        trajectory = evolve(smooth_field, EquationSpec(), cfg, hooks=[lambda F: None])
        assert trajectory.records == []

    def test_zero_horizon(self, smooth_field):
        trajectory = evolve(smooth_field, EquationSpec(), IntegratorConfig(t_end=0.0))
        assert trajectory.final.time_tag == 0.0
        assert list(trajectory.checkpoints) == [0.0]

    def test_t_end_is_absolute(self, smooth_field):
        cfg = IntegratorConfig(dt=1e-3, t_end=3.01)
        trajectory = evolve(smooth_field.at_time(3.0), EquationSpec(), cfg)
        assert trajectory.final.time_tag == pytest.approx(3.01, abs=1e-12)
        assert len(trajectory.reports) == 11

    def test_t_end_before_start(self, smooth_field):
        with pytest.raises(ConfigError):
            evolve(smooth_field.at_time(1.0), EquationSpec(), IntegratorConfig(t_end=0.5))

    def test_conserves_mass_and_energy(self, grid32):
        spec = EquationSpec(k=1, mu=1, form="original")
        u0 = gaussian_field(grid32, 0.5, 2.0)
        cfg = IntegratorConfig(dt=1e-3, t_end=0.5)
        final = evolve(u0, spec, cfg).final
        start = dealias(u0, 2)
        assert abs(mass(final) - mass(start)) < 1e-7 * mass(start)
        assert abs(energy(final, spec) - energy(start, spec)) < 1e-6 * abs(energy(start, spec))

    def test_conserves_modified_energy(self, grid32):
        spec = EquationSpec(k=2, mu=-1)
        u0 = gaussian_field(grid32, 0.5, 2.0)
        final = evolve(u0, spec, IntegratorConfig(dt=1e-3, t_end=0.5)).final
        start = dealias(u0, 3)
        before = modified_energy(start, spec)
        assert abs(modified_energy(final, spec) - before) < 1e-6 * abs(before)

    def test_blow_up_keeps_trajectory(self, smooth_field, monkeypatch):
        real_step = integrator.step_ifrk4
        calls = []

        def failing_step(F, spec, dt):
            calls.append(F.time_tag)
            if len(calls) > 2:
                raise BlowUpError("non-finite stage", F.time_tag, F)
            return real_step(F, spec, dt)

        monkeypatch.setattr(integrator, "step_ifrk4", failing_step)
        cfg = IntegratorConfig(dt=1e-3, t_end=0.1)
        with pytest.raises(BlowUpError) as excinfo:
            evolve(smooth_field, EquationSpec(), cfg, hooks=[lambda F: F.time_tag])
        trajectory = excinfo.value.trajectory
        assert trajectory.status == "blow_up"
        assert trajectory.final.time_tag == pytest.approx(2e-3)
        assert trajectory.records == [0.0]
        assert excinfo.value.time_tag == pytest.approx(2e-3)

    def test_step_reports_non_finite_stage(self, smooth_field):
        coeffs = np.array(smooth_field.coeffs)
        coeffs[1, 1] = np.nan
        broken = smooth_field.with_coeffs(coeffs)
        with pytest.raises(BlowUpError) as excinfo:
            step_ifrk4(broken, EquationSpec(), 1e-3)
        assert excinfo.value.last_good is broken


class TestTimeStepGuards:
    def test_resolvability(self):
        grid = Grid2D.create(256, L_x=2 * math.pi)
        with pytest.raises(ConfigError, match="resolvability"):
            check_time_step(SpectralField2D.zeros(grid), EquationSpec(), IntegratorConfig(dt=1e-2))

    def test_nonlinear_stage(self, smooth_field):
        with pytest.raises(ConfigError, match="nonlinear stage"):
            check_time_step(smooth_field.scale(1e4), EquationSpec(), IntegratorConfig(dt=1e-2))

    def test_zero_field_passes(self, grid32):
        check_time_step(SpectralField2D.zeros(grid32), EquationSpec(), IntegratorConfig())


class TestCheckpoints:
    def test_round_trip(self, smooth_field, tmp_path):
        spec = EquationSpec(k=2, mu=-1)
        field = smooth_field.at_time(0.25)
        paths = save_checkpoint(field, spec, tmp_path / "u.csv")
        assert [p.name for p in paths] == ["u.csv", "u.json"]
        loaded, loaded_spec = load_checkpoint(tmp_path / "u.csv")
        np.testing.assert_array_equal(loaded.coeffs, field.coeffs)
        assert loaded.grid == field.grid
        assert loaded.time_tag == 0.25
        assert loaded_spec == spec

    def test_format_tag(self, smooth_field, tmp_path):
        save_checkpoint(smooth_field, EquationSpec(), tmp_path / "u.csv")
        sidecar = tmp_path / "u.json"
        meta = json.loads(sidecar.read_text())
        meta["format"] = "something-else/v9"
        sidecar.write_text(json.dumps(meta))
        with pytest.raises(ConfigError, match="format"):
            load_checkpoint(tmp_path / "u.csv")


class TestExactSolutions:
    @pytest.fixture
    def channel(self) -> Grid2D:
        return Grid2D.create(256, 8)

    def test_shape_error_of_exact_soliton(self, channel):
        spec = EquationSpec(k=1, mu=1, form="original")
        F = line_soliton(channel, spec, 0.5, x0=40.0, t=0.5)
        error, shift = soliton_shape_error(F, spec, 0.5, x0=40.0)
        assert error < 1e-8
        assert abs(shift) < 1e-6

    def test_shape_error_recovers_shift(self, channel):
        spec = EquationSpec(k=2, mu=1, form="original")
        F = line_soliton(channel, spec, 0.5, x0=40.3)
        error, shift = soliton_shape_error(F, spec, 0.5, x0=40.0)
        assert error < 1e-8
        assert shift == pytest.approx(0.3, abs=1e-6)

    def test_soliton_regression(self, channel):
        # K=0.5 KdV-type line soliton in the original form, T=1
        spec = EquationSpec(k=1, mu=1, form="original")
        K, x0 = 0.5, channel.L_x / 2
        u0 = line_soliton(channel, spec, K, x0)
        final = evolve(u0, spec, IntegratorConfig(dt=1e-3, t_end=1.0)).final
        error, shift = soliton_shape_error(final, spec, K, x0, t=1.0)
        assert error < 1e-5
        assert abs(shift) < 1e-3

    def test_cross_validate_forms(self):
        grid = Grid2D.create(128, L_x=16 * math.pi)
        error = cross_validate_forms(
            lambda x, y: np.exp(-(x**2 + y**2) / 4.0),
            grid,
            grid,
            LINEAR,
            IntegratorConfig(dt=1e-3, t_end=0.1),
        )
        assert error < 1e-6


@pytest.mark.slow
class TestOrderOfAccuracy:
    def test_fourth_order_self_convergence(self):
        grid = Grid2D.create(128, L_x=16 * math.pi)
        spec = EquationSpec(k=1, mu=1)
        u0 = gaussian_field(grid, 1.0, 2.0)
        finals = [
            evolve(u0, spec, IntegratorConfig(dt=dt, t_end=1.0)).final
            for dt in (2e-3, 1e-3, 5e-4)
        ]
        e1 = np.linalg.norm(finals[0].coeffs - finals[1].coeffs)
        e2 = np.linalg.norm(finals[1].coeffs - finals[2].coeffs)
        assert math.log2(e1 / e2) == pytest.approx(4.0, abs=0.2)
