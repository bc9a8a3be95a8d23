"""
Tests for grids, transforms and spectral derivatives.
"""

import numpy as np
import pytest

from noda.errors import GridError
from noda.grid_fft import (
    Grid1D,
    Grid2D,
    SpectralField,
    coordinates,
    dealias_mask,
    dft_forward,
    dft_inverse,
    spectral_derivative,
    wavenumbers,
)


# ============================================================
# GRIDS
# ============================================================

class TestGrids:

    def test_dx_times_n_is_exact(self):
        for n in (8, 64, 128, 512):
            grid = Grid1D(n, 64.0 * np.pi)
            assert grid.dx * grid.n == grid.length

    def test_non_power_of_two_rejected(self):
        with pytest.raises(GridError):
            Grid1D(100, 1.0)

    def test_too_small_rejected(self):
        with pytest.raises(GridError):
            Grid1D(4, 1.0)

    def test_non_positive_length_rejected(self):
        with pytest.raises(GridError):
            Grid1D(16, 0.0)

    def test_grid2d_shape(self):
        grid = Grid2D(64, 64)
        assert grid.shape == (64, 64)
        assert grid.size == 4096
        assert grid.length == 1.0

    def test_grid2d_rejects_odd_axis(self):
        with pytest.raises(GridError):
            Grid2D(64, 48)

    def test_coordinates_in_unit_interval(self):
        c = coordinates(Grid2D(8, 8))
        assert c.shape == (8, 8, 2)
        assert c.min() == 0.0 and c.max() < 1.0

    def test_coordinates_from_shape_match_grid(self):
        assert np.array_equal(coordinates((8,)), coordinates(Grid1D(8, 2 * np.pi)))
        assert coordinates((8,)).shape == (8, 1)
        assert coordinates((4, 8))[3, 5].tolist() == [0.75, 0.625]


# ============================================================
# WAVENUMBERS
# ============================================================

class TestWavenumbers:

    def test_integer_wavenumbers_at_2pi(self):
        k = wavenumbers(Grid1D(8, 2 * np.pi))
        assert np.allclose(k, [0, 1, 2, 3, 4, -3, -2, -1])

    def test_scaling_with_length(self):
        k = wavenumbers(Grid1D(8, 4 * np.pi))
        assert np.allclose(k[:3], [0, 0.5, 1.0])

    def test_first_mode_ks_grid(self):
        k = wavenumbers(Grid1D(512, 64 * np.pi))
        assert k[1] == pytest.approx(1.0 / 32.0, rel=1e-14)

    def test_2d_layout(self):
        kx, ky = wavenumbers(Grid2D(8, 8))
        assert kx.shape == (8, 8)
        assert kx[1, 0] == pytest.approx(2 * np.pi)
        assert ky[0, 1] == pytest.approx(2 * np.pi)


# ============================================================
# TRANSFORMS
# ============================================================

class TestTransforms:

    def test_constant_field_is_dc_only(self):
        spec = dft_forward(np.full(16, 3.0))
        assert spec.coeffs[0] == pytest.approx(48.0)
        assert np.max(np.abs(spec.coeffs[1:])) < 1e-12

    def test_pure_tone(self):
        grid = Grid1D(64, 2 * np.pi)
        x = np.arange(64) * grid.dx
        c = dft_forward(np.sin(x)).coeffs
        big = np.flatnonzero(np.abs(c) > 1e-9)
        assert sorted(big.tolist()) == [1, 63]

    @pytest.mark.parametrize("shape", [(8,), (128,), (512,), (64, 64)])
    def test_round_trip_and_parseval(self, shape):
        rng = np.random.default_rng(0)
        v = rng.normal(size=shape)
        spec = dft_forward(v)
        assert np.max(np.abs(dft_inverse(spec) - v)) <= 1e-12 * np.max(np.abs(v))
        n = v.size
        assert np.sum(v**2) == pytest.approx(np.sum(np.abs(spec.coeffs) ** 2) / n, rel=1e-10)

    def test_linearity(self):
        rng = np.random.default_rng(1)
        u, v = rng.normal(size=(2, 32))
        lhs = dft_forward(2.0 * u - 3.0 * v).coeffs
        rhs = 2.0 * dft_forward(u).coeffs - 3.0 * dft_forward(v).coeffs
        assert np.max(np.abs(lhs - rhs)) < 1e-12 * np.max(np.abs(rhs))

    def test_real_field_is_conjugate_symmetric(self):
        rng = np.random.default_rng(2)
        assert dft_forward(rng.normal(size=(16, 16))).is_conjugate_symmetric()

    def test_asymmetric_coefficients_detected(self):
        coeffs = np.zeros(8, dtype=complex)
        coeffs[1] = 1.0
        assert not SpectralField(coeffs, (8,)).is_conjugate_symmetric()

    def test_non_power_of_two_transform_rejected(self):
        with pytest.raises(GridError):
            dft_forward(np.zeros(12))


# ============================================================
# DERIVATIVES
# ============================================================

class TestSpectralDerivative:

    def setup_method(self):
        self.grid = Grid1D(64, 2 * np.pi)
        self.x = np.arange(64) * self.grid.dx

    def test_first_derivative_of_sine(self):
        d = spectral_derivative(np.sin(self.x), self.grid, 1)
        assert np.max(np.abs(d - np.cos(self.x))) < 1e-10

    def test_second_derivative_of_sine(self):
        d = spectral_derivative(np.sin(self.x), self.grid, 2)
        assert np.max(np.abs(d + np.sin(self.x))) < 1e-10

    def test_exp_sine(self):
        f = np.exp(np.sin(self.x))
        d = spectral_derivative(f, self.grid, 1)
        assert np.max(np.abs(d - np.cos(self.x) * f)) < 1e-8

    def test_order_zero_rejected(self):
        with pytest.raises(GridError):
            spectral_derivative(np.sin(self.x), self.grid, 0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(GridError):
            spectral_derivative(np.zeros(32), self.grid, 1)

    def test_dealias_mask_keeps_two_thirds(self):
        mask = dealias_mask(64)
        assert mask[0] and mask[21] and not mask[22]
