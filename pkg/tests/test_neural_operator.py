"""
Tests for the predictor network: parameter layout, spectral convolution,
residual structure, shift equivariance and resolution transfer.
"""

import numpy as np
import pytest

from noda.autodiff import Tensor
from noda.errors import ShapeError
from noda.grid_fft import coordinates
from noda.neural_operator import (
    SpectralConvParams,
    block_prefix,
    init_params,
    lift,
    predict_step,
    spectral_conv,
    spectral_weight_shape,
    zero_params,
)
from noda.schemas.config import ModelConfig


def _config(**overrides) -> ModelConfig:
    data = dict(equation="ks", ndim=1, n=64, length=64 * np.pi, width=8, modes=8, n_blocks=2,
                hidden=16, p=64)
    data.update(overrides)
    return ModelConfig(**data)


def _identity_conv(shape: tuple[int, ...]) -> SpectralConvParams:
    width = shape[-1]
    re = np.broadcast_to(np.eye(width), shape).copy()
    return SpectralConvParams(re=Tensor(re), im=Tensor(np.zeros(shape)))


# ============================================================
# PARAMETERS
# ============================================================

class TestParameters:

    def test_seeded_initialisation(self):
        a, b = init_params(_config(), seed=5), init_params(_config(), seed=5)
        assert all(np.array_equal(a[k], b[k]) for k in a)
        c = init_params(_config(), seed=6)
        assert not np.array_equal(a["predictor.lift.weight"], c["predictor.lift.weight"])

    def test_layout(self):
        params = init_params(_config(n_blocks=3))
        assert params["predictor.lift.weight"].shape == (2, 8)
        assert params[f"{block_prefix(2)}.conv.re"].shape == (8, 8, 8)
        assert params["measurement.fc1.weight"].shape == (64, 16)
        assert params["gain.w_z"].shape == (64, 64)
        assert np.all(params["gain.b"] == 0.0)
        assert "gain.c_star" not in params.arrays

    def test_2d_spectral_weight_shape(self):
        config = _config(equation="ns", ndim=2, n=16, length=1.0, modes=4, p=256)
        assert spectral_weight_shape(config) == (8, 4, 8, 8)

    def test_no_coordinates_single_input_channel(self):
        assert init_params(_config(use_coords=False))["predictor.lift.weight"].shape == (1, 8)

    def test_lift_appends_grid_coordinates(self):
        config = _config(n=16, modes=4, p=16)
        bound = init_params(config, seed=2).bind()
        out = lift(Tensor(np.zeros((1, 16))), bound).value
        expected = coordinates((16,)) @ bound["predictor.lift.weight"].value[1:] + bound["predictor.lift.bias"].value
        assert np.allclose(out[0], expected, atol=1e-14)

    def test_learnable_cstar_starts_at_identity(self):
        params = init_params(_config(learnable_cstar=True))
        assert np.array_equal(params["gain.c_star"], np.eye(64))

    def test_with_arrays_requires_same_names(self):
        params = init_params(_config())
        with pytest.raises(KeyError):
            params.with_arrays({"predictor.lift.weight": np.zeros((2, 8))})

    def test_operator_for_identity_follows_field_size(self):
        op = init_params(_config()).operator_for(128)
        assert op.kind == "identity" and op.p == 128

    def test_operator_for_random_is_tied_to_model(self):
        params = init_params(_config(measurement="random", measurement_seed=4, p=10))
        assert np.array_equal(params.operator_for(64, "random", 4).matrix, params.measurement_operator().matrix)
        with pytest.raises(ValueError):
            params.operator_for(64, "identity")
        with pytest.raises(ValueError):
            params.operator_for(64, "random", 5)
        with pytest.raises(ShapeError):
            params.operator_for(128)

    def test_modes_bounded_by_grid(self):
        with pytest.raises(ValueError):
            _config(n=8, p=8, modes=8)


# ============================================================
# SPECTRAL CONVOLUTION
# ============================================================

class TestSpectralConv:

    def test_zero_weights_give_zero(self):
        v = np.random.default_rng(0).normal(size=(2, 32, 4))
        conv = SpectralConvParams(re=Tensor(np.zeros((6, 4, 4))), im=Tensor(np.zeros((6, 4, 4))))
        assert np.all(spectral_conv(v, conv).value == 0.0)

    def test_identity_weights_reproduce_band_limited_input(self):
        x = np.arange(32) / 32
        wave = np.sin(2 * np.pi * 3 * x) + 0.5 * np.cos(2 * np.pi * 5 * x)
        v = np.stack([wave, 2 * wave], axis=-1)[None]
        out = spectral_conv(v, _identity_conv((8, 2, 2)))
        assert np.max(np.abs(out.value - v)) < 1e-12

    def test_identity_weights_low_pass(self):
        x = np.arange(32) / 32
        low = np.sin(2 * np.pi * 2 * x)
        v = (low + np.sin(2 * np.pi * 11 * x))[None, :, None]
        out = spectral_conv(v, _identity_conv((4, 1, 1)))
        assert np.max(np.abs(out.value[0, :, 0] - low)) < 1e-12

    def test_identity_weights_2d(self):
        x = np.arange(16) / 16
        field = np.sin(2 * np.pi * x)[:, None] * np.cos(2 * np.pi * 2 * x)[None, :]
        out = spectral_conv(field[None, :, :, None], _identity_conv((8, 4, 1, 1)))
        assert np.max(np.abs(out.value[0, :, :, 0] - field)) < 1e-12

    def test_too_few_points(self):
        with pytest.raises(ShapeError):
            spectral_conv(np.zeros((1, 8, 2)), _identity_conv((8, 2, 2)))


# ============================================================
# PREDICTION
# ============================================================

class TestPredictStep:

    def test_zero_params_are_identity(self):
        z = np.random.default_rng(1).normal(size=64)
        assert np.array_equal(predict_step(z, zero_params(_config())).value, z)

    @pytest.mark.parametrize("n", [64, 128, 512])
    def test_shape_preserved(self, n):
        params = init_params(_config(), seed=0)
        z = np.random.default_rng(n).normal(size=(3, n))
        assert predict_step(z, params).shape == (3, n)
        assert predict_step(z[0], params).shape == (n,)

    def test_2d_shape(self):
        config = _config(equation="ns", ndim=2, n=16, length=1.0, modes=4, p=256)
        z = np.random.default_rng(0).normal(size=(2, 16, 16))
        assert predict_step(z, init_params(config)).shape == (2, 16, 16)

    def test_shift_equivariance_without_coordinates(self):
        params = init_params(_config(use_coords=False), seed=2)
        z = np.random.default_rng(3).normal(size=64)
        shifted = predict_step(np.roll(z, 5), params).value
        assert np.max(np.abs(shifted - np.roll(predict_step(z, params).value, 5))) < 1e-12

    def test_resolution_transfer_on_band_limited_input(self):
        params = init_params(_config(use_coords=False, n_blocks=1), seed=4)
        coarse_x = np.arange(64) / 64
        fine_x = np.arange(128) / 128

        def field(x):
            return np.sin(2 * np.pi * 2 * x) + 0.3 * np.cos(2 * np.pi * 5 * x)

        coarse = predict_step(field(coarse_x), params).value
        fine = predict_step(field(fine_x), params).value
        assert np.max(np.abs(fine[::2] - coarse)) < 1e-10

    def test_grid_smaller_than_modes_rejected(self):
        with pytest.raises(ShapeError):
            predict_step(np.zeros(8), init_params(_config()))

    def test_wrong_rank_rejected(self):
        with pytest.raises(ShapeError):
            predict_step(np.zeros((1, 2, 64)), init_params(_config()))
