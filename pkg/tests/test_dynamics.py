"""
Tests for equation right-hand sides, the coordinate map and the commutators.

The commutators are checked against a direct (non-FFT) convolution of the
coefficient arrays; the right-hand sides against exact travelling waves.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st
from pydantic import ValidationError
from scipy import signal

from gzk_lab.dynamics import (
    A_COEF,
    B_COEF,
    CoordinateMap,
    EquationSpec,
    b_theta_apply,
    commutator_F,
    commutator_G,
    coordinate_map_apply,
    derivative_symbol,
    line_soliton,
    linear_symbol,
    min_kernel_bound_check,
    nonlinear_term,
    rhs,
)
from gzk_lab.errors import ConfigError, DomainError, SpecMismatchError
from gzk_lab.probes.multilinear import single_mode_field
from gzk_lab.spacetime import space_time_product, space_time_random
from gzk_lab.spectral import (
    Grid2D,
    SpectralField2D,
    dealias,
    dealias_mask,
    forward_transform,
    hermitian_defect,
    random_field,
)


def _direct_power(coeffs: np.ndarray, grid: Grid2D, p: int) -> np.ndarray:
    """Coefficients of u^p by direct convolution, Nyquist lines dropped on input and output."""
    n_x, n_y = grid.shape
    centred = np.fft.fftshift(coeffs).copy()
    centred[0, :] = 0.0
    centred[:, 0] = 0.0
    weight = grid.area_weight / (2 * math.pi)
    result = centred
    for _ in range(p - 1):
        result = signal.convolve2d(result, centred, mode="full") * weight
    zero_x, zero_y = p * (n_x // 2), p * (n_y // 2)
    block = result[zero_x - n_x // 2 : zero_x + n_x // 2, zero_y - n_y // 2 : zero_y + n_y // 2]
    block = block.copy()
    block[0, :] = 0.0
    block[:, 0] = 0.0
    return np.fft.ifftshift(block)


def _direct_commutator(U: SpectralField2D, sigma: float, spec: EquationSpec) -> np.ndarray:
    w = U.grid.wave_vector()
    p = spec.degree
    smoothed = U.coeffs * np.exp(-sigma * w.l1)
    bracket = _direct_power(U.coeffs, U.grid, p) - np.exp(sigma * w.l1) * _direct_power(
        smoothed, U.grid, p
    )
    values = derivative_symbol(spec, w) * bracket
    return np.where(dealias_mask(U.grid, p), values, 0.0)


class TestEquationSpec:
    def test_defaults(self):
        spec = EquationSpec()
        assert (spec.k, spec.mu, spec.form, spec.nonlinear) == (1, 1, "symmetrized", True)
        assert spec.degree == 2

    def test_rejects_k(self):
        with pytest.raises(ValidationError, match="k must be 1 or 2"):
            EquationSpec(k=3)

    def test_rejects_mu(self):
        with pytest.raises(ValidationError, match="mu must be -1 or \\+1"):
            EquationSpec(mu=0)

    def test_rejects_unknown_field(self):
        with pytest.raises(ValidationError):
            EquationSpec(kappa=1)

    def test_coefficients(self):
        assert A_COEF == pytest.approx(2 ** (-2 / 3))
        assert B_COEF == pytest.approx(math.sqrt(3) * 2 ** (-2 / 3))

    @pytest.mark.parametrize(
        "kwargs, coupling",
        [
            ({"mu": 1}, A_COEF),
            ({"mu": -1}, -A_COEF),
            ({"mu": 1, "form": "original"}, 1.0),
            ({"mu": -1, "nonlinear": False}, 0.0),
        ],
    )
    def test_coupling(self, kwargs, coupling):
        assert EquationSpec(**kwargs).coupling == pytest.approx(coupling)


class TestCoordinateMap:
    def test_round_trip(self, rng):
        m = CoordinateMap.standard()
        points = rng.standard_normal((10, 2))
        back = coordinate_map_apply(coordinate_map_apply(points, m, "fwd"), m, "inv")
        np.testing.assert_allclose(back, points, atol=1e-14)

    def test_determinant(self):
        m = CoordinateMap.standard()
        assert np.linalg.det(m.forward) == pytest.approx(m.determinant)
        assert m.determinant == pytest.approx(-2 * A_COEF * B_COEF)

    def test_symbol_transforms_into_symmetric_form(self, rng):
        # xi(xi^2 + eta^2) in the original frame equals xi'^3 + eta'^3 under the map
        m = CoordinateMap.standard()
        for xi, eta in rng.standard_normal((5, 2)):
            xi_s, eta_s = np.linalg.solve(m.forward.T, [xi, eta])
            expected = xi * (xi**2 + eta**2)
            assert xi_s**3 + eta_s**3 == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_bad_direction(self):
        with pytest.raises(ConfigError):
            coordinate_map_apply(np.zeros(2), CoordinateMap.standard(), "sideways")


class TestSymbols:
    def test_linear_symbols(self, grid16):
        w = grid16.wave_vector()
        np.testing.assert_allclose(
            linear_symbol(EquationSpec(), w), 1j * (w.xi**3 + w.eta**3)
        )
        np.testing.assert_allclose(
            linear_symbol(EquationSpec(form="original"), w), 1j * w.xi * (w.xi**2 + w.eta**2)
        )

    def test_symbols_are_imaginary(self, grid16):
        w = grid16.wave_vector()
        for spec in (EquationSpec(), EquationSpec(form="original", k=2, mu=-1)):
            assert np.all(linear_symbol(spec, w).real == 0)
            assert np.all(derivative_symbol(spec, w).real == 0)

    def test_nonlinear_term_vanishes_for_constants(self, grid16):
        u = forward_transform(np.full(grid16.shape, 0.3), grid16)
        assert np.max(np.abs(nonlinear_term(u, EquationSpec(k=2, mu=-1)).coeffs)) < 1e-12

    def test_linear_flow_has_no_nonlinear_term(self, smooth_field):
        term = nonlinear_term(smooth_field, EquationSpec(nonlinear=False))
        assert np.all(term.coeffs == 0)


class TestTravellingWaves:
    """rhs on a line soliton equals -speed * d/dx of the profile on the retained modes."""

    @pytest.mark.parametrize(
        "spec, speed",
        [
            (EquationSpec(k=1, mu=1, form="original"), 4 * 0.5**2),
            (EquationSpec(k=1, mu=1, form="symmetrized"), 4 * 0.5**2),
            (EquationSpec(k=1, mu=-1, form="symmetrized"), 4 * 0.5**2),
            (EquationSpec(k=2, mu=1, form="original"), 0.5**2),
            (EquationSpec(k=2, mu=1, form="symmetrized"), 0.5**2),
        ],
    )
    def test_rhs_matches_translation(self, spec, speed):
        grid = Grid2D.create(256, 8, L_x=32 * math.pi, L_y=32 * math.pi)
        u = line_soliton(grid, spec, K=0.5, x0=grid.L_x / 2)
        du = rhs(u, spec)
        w = grid.wave_vector()
        exact = dealias(u.with_coeffs(-speed * 1j * w.xi * u.coeffs), spec.degree)
        scale = float(np.max(np.abs(exact.coeffs)))
        assert np.max(np.abs(du.coeffs - exact.coeffs)) < 1e-8 * scale

    def test_soliton_moves_at_its_speed(self):
        spec = EquationSpec(k=1, mu=1, form="original")
        grid = Grid2D.create(256, 8)
        later = line_soliton(grid, spec, 0.5, x0=10.0, t=2.0)
        moved = line_soliton(grid, spec, 0.5, x0=12.0)
        np.testing.assert_allclose(later.coeffs, moved.coeffs, atol=1e-12)
        assert later.time_tag == 2.0

    def test_soliton_mass(self):
        # int (6K^2 sech^2(Kx))^2 dx = 48 K^3
        spec = EquationSpec(k=1, mu=1, form="original")
        grid = Grid2D.create(256, 8, L_x=32 * math.pi, L_y=32 * math.pi)
        K = 0.5
        u = line_soliton(grid, spec, K, x0=grid.L_x / 2)
        mass = float(np.sum(np.abs(u.coeffs) ** 2) * grid.area_weight)
        assert mass == pytest.approx(48 * K**3 * grid.L_y, rel=1e-10)

    @pytest.mark.parametrize(
        "spec, K",
        [
            (EquationSpec(k=2, mu=-1), 0.5),
            (EquationSpec(nonlinear=False), 0.5),
            (EquationSpec(), 0.0),
        ],
    )
    def test_no_soliton(self, spec, K):
        with pytest.raises(DomainError):
            line_soliton(Grid2D.create(16), spec, K, 0.0)


class TestCommutators:
    @pytest.fixture
    def U(self, grid16, rng):
        return random_field(grid16, rng, taper=1.0, degree=2)

    def test_zero_at_sigma_zero(self, U):
        assert np.all(commutator_F(U, 0.0, EquationSpec(k=1)).coeffs == 0)
        assert np.all(commutator_G(U, 0.0, EquationSpec(k=2)).coeffs == 0)

    def test_kind_mismatch(self, U):
        with pytest.raises(SpecMismatchError):
            commutator_F(U, 0.1, EquationSpec(k=2))
        with pytest.raises(SpecMismatchError):
            commutator_G(U, 0.1, EquationSpec(k=1))

    def test_negative_sigma(self, U):
        with pytest.raises(DomainError):
            commutator_F(U, -0.1, EquationSpec(k=1))

    @pytest.mark.parametrize("sigma", [0.01, 0.1, 0.5])
    def test_F_matches_direct_convolution(self, U, sigma):
        spec = EquationSpec(k=1, mu=1)
        expected = _direct_commutator(U, sigma, spec)
        result = commutator_F(U, sigma, spec).coeffs
        scale = float(np.max(np.abs(expected)))
        assert scale > 0
        assert np.max(np.abs(result - expected)) < 1e-10 * scale

    @pytest.mark.parametrize("sigma", [0.01, 0.1])
    def test_G_matches_direct_convolution(self, grid16, rng, sigma):
        spec = EquationSpec(k=2, mu=-1)
        U = random_field(grid16, rng, taper=1.0, degree=3)
        expected = _direct_commutator(U, sigma, spec)
        result = commutator_G(U, sigma, spec).coeffs
        scale = float(np.max(np.abs(expected)))
        assert np.max(np.abs(result - expected)) < 1e-10 * scale

    def test_G_is_cubic(self, grid16, rng):
        spec = EquationSpec(k=2, mu=1)
        U = random_field(grid16, rng, degree=3)
        single = commutator_G(U, 0.2, spec).coeffs
        doubled = commutator_G(U.scale(2.0), 0.2, spec).coeffs
        assert np.max(np.abs(doubled - 8.0 * single)) < 1e-10 * np.max(np.abs(8.0 * single))

    @hsettings(max_examples=20, deadline=None)
    @given(factor=st.floats(min_value=0.1, max_value=10.0), negative=st.booleans())
    def test_F_is_quadratic(self, factor, negative):
        grid = Grid2D.create(16, L_x=2 * math.pi)
        U = random_field(grid, np.random.default_rng(8), taper=1.0, degree=2)
        lam = -factor if negative else factor
        spec = EquationSpec(k=1, mu=1)
        single = commutator_F(U, 0.2, spec).coeffs
        scaled = commutator_F(U.scale(lam), 0.2, spec).coeffs
        assert np.max(np.abs(scaled - lam**2 * single)) < 1e-10 * np.max(np.abs(lam**2 * single))

    @hsettings(max_examples=20, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        sigma=st.floats(min_value=0.01, max_value=0.5),
    )
    def test_outputs_are_hermitian(self, seed, sigma):
        grid = Grid2D.create(16, L_x=2 * math.pi)
        rng = np.random.default_rng(seed)
        U2 = random_field(grid, rng, taper=1.0, degree=2)
        U3 = random_field(grid, rng, taper=1.0, degree=3)
        assert hermitian_defect(commutator_F(U2, sigma, EquationSpec(k=1)).coeffs) < 1e-12
        assert hermitian_defect(commutator_G(U3, sigma, EquationSpec(k=2)).coeffs) < 1e-12


class TestBTheta:
    def test_theta_zero_is_plain_product(self, rng):
        grid = Grid2D.create(8, L_x=8 * math.pi)
        u = space_time_random(grid, (5, 5, 8), 4.0, rng)
        v = space_time_random(grid, (5, 5, 8), 4.0, rng)
        weighted = b_theta_apply(u, v, 0.0)
        plain = space_time_product(u, v)
        assert weighted.offsets == plain.offsets
        np.testing.assert_allclose(weighted.coeffs, plain.coeffs, atol=1e-14)

    def test_kernel_weights_point_masses(self):
        grid = Grid2D.create(8, L_x=2 * math.pi)
        u = single_mode_field(grid, 4.0, (2, 1, 0))
        v = single_mode_field(grid, 4.0, (1, 1, 1))
        theta = 0.2
        weighted = b_theta_apply(u, v, theta)
        plain = space_time_product(u, v)
        # min(|gamma - gamma1|_1, |gamma1|_1) = min(3, 2) with unit spacing
        support = np.abs(plain.coeffs) > 1e-12 * np.abs(plain.coeffs).max()
        assert np.count_nonzero(support) == 1
        np.testing.assert_allclose(weighted.coeffs[support] / plain.coeffs[support], 2.0**theta)

    @pytest.mark.parametrize("theta", [-0.1, 0.25, 0.3])
    def test_theta_range(self, rng, theta):
        grid = Grid2D.create(8)
        u = space_time_random(grid, (3, 3, 4), 4.0, rng)
        with pytest.raises(DomainError):
            b_theta_apply(u, u, theta)


class TestKernelBound:
    def test_sharp_l1_constant(self, rng):
        violations, max_ratio = min_kernel_bound_check(rng, 100_000, 2 * math.sqrt(2), "l1")
        assert violations == 0
        assert max_ratio <= 1.0 + 1e-12

    def test_euclidean_constant(self, rng):
        violations, _ = min_kernel_bound_check(rng, 100_000, 2.0, "l2")
        assert violations == 0
