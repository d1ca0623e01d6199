"""
Acceptance-scale checks: long conservation runs, million-sample inequality suites,
exact exponent laws and probe determinism.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from gzk_lab.analyticity import (
    ZK_THETA,
    BoundCurve,
    build_zk_ledger,
    condition2_lhs,
    epsilon_of_s,
    estimate_radius,
    fit_decay_exponent,
)
from gzk_lab.dynamics import EquationSpec
from gzk_lab.functionals import mass, modified_energy
from gzk_lab.initial_data import gaussian_field
from gzk_lab.integrator import IntegratorConfig, evolve
from gzk_lab.probes.growth import almost_conservation_probe
from gzk_lab.probes.multilinear import (
    bilinear_probe,
    box_grid,
    multilinear_ratio,
    single_mode_field,
    single_mode_ratio,
)
from gzk_lab.probes.report import ProbeParams
from gzk_lab.probes.scalar import exp_minus_one_check, min_exp_inequality_check
from gzk_lab.spectral import Grid2D, SpectralField2D, dealias


class TestExactLaws:
    def test_epsilon_never_exceeds_its_value_at_zero(self):
        grid = [Fraction(-1, 4) + Fraction(9, 4) * Fraction(j, 1000) for j in range(1, 1001)]
        eps0 = epsilon_of_s(0)
        assert all(epsilon_of_s(s) <= eps0 for s in grid)

    @pytest.mark.parametrize("sigma0", [0.3, 0.7])
    def test_radius_of_synthetic_spectra(self, sigma0):
        grid = Grid2D.create(64, L_x=16 * math.pi)
        coeffs = np.exp(-sigma0 * grid.wave_vector().l1)
        estimate = estimate_radius(SpectralField2D(grid, coeffs))
        assert estimate.sigma_hat == pytest.approx(sigma0, rel=0.03)

    def test_ledger_decay_exponent(self):
        ledger = build_zk_ledger(1.0, 1.0, [2.0, 4.0, 8.0, 16.0, 32.0])
        for row in ledger.rows:
            lhs = condition2_lhs(row.T, ledger.delta, 1.0, ZK_THETA, 1.0, row.sigma_star)
            assert lhs == pytest.approx(1.0, rel=1e-12)
        fit = fit_decay_exponent([(row.T, row.sigma_star) for row in ledger.rows])
        assert fit.exponent == pytest.approx(-1.0 / ZK_THETA, abs=1e-6)

    def test_bound_curve_exponents(self):
        assert BoundCurve(kind="ZK_minus4_eps", eps=0.01).exponent == -4.0 + 0.01
        assert BoundCurve(kind="mZK_minus4_3").exponent == -4.0 / 3.0

    @pytest.mark.parametrize(
        "modes", [[(1, 0, 0), (2, -1, 3)], [(1, 0, 1), (-2, 1, 0), (1, 1, -2)]]
    )
    def test_single_mode_closed_forms(self, modes):
        s = 0.0 if len(modes) == 2 else 0.25
        eps = float(epsilon_of_s(s))
        grid = box_grid(8 * math.pi)
        factors = [single_mode_field(grid, 4.0, mode) for mode in modes]
        assert multilinear_ratio(factors, s, eps) == pytest.approx(
            single_mode_ratio(grid, 4.0, modes, s, eps), rel=1e-10
        )

    def test_identical_seeds_give_identical_reports(self):
        p = ProbeParams(trials=3, band=2, n_t=8, seed=9)
        assert bilinear_probe(p) == bilinear_probe(p)


@pytest.mark.slow
class TestScalarSuites:
    @pytest.mark.parametrize("alpha", [0.0, 0.3, 0.75, 1.0])
    def test_exp_minus_one(self, alpha):
        assert exp_minus_one_check(alpha, samples=1_000_000).violation_count == 0

    @pytest.mark.parametrize("sigma", [1e-3, 1e-2, 1e-1, 1.0])
    def test_min_exp(self, sigma):
        report = min_exp_inequality_check(ZK_THETA, sigma, samples=1_000_000)
        assert report.violation_count == 0


@pytest.mark.slow
class TestLongConservation:
    """T=5 runs on the default 32pi box at N=256."""

    def test_zk_mass(self):
        grid = Grid2D.create(256)
        spec = EquationSpec(k=1, mu=1)
        u0 = gaussian_field(grid, 0.5, 2.0)
        final = evolve(u0, spec, IntegratorConfig(dt=1e-3, t_end=5.0)).final
        m0 = mass(dealias(u0, 2))
        assert abs(mass(final) - m0) < 1e-8 * m0

    def test_mzk_modified_energy(self):
        grid = Grid2D.create(256)
        spec = EquationSpec(k=2, mu=-1)
        u0 = gaussian_field(grid, 0.5, 2.0)
        final = evolve(u0, spec, IntegratorConfig(dt=1e-3, t_end=5.0)).final
        e0 = modified_energy(dealias(u0, 3), spec)
        assert abs(modified_energy(final, spec) - e0) < 1e-6 * abs(e0)


@pytest.mark.slow
class TestAlmostConservationScaling:
    def test_zk_M_sigma(self):
        report = almost_conservation_probe("M", ProbeParams())
        assert report.slope >= 0.20
        assert report.passed

    def test_mzk_E_sigma(self):
        report = almost_conservation_probe("E", ProbeParams())
        assert report.slope >= 0.70
        assert report.passed
