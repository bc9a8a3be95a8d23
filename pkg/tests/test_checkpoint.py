"""
Tests for the NODM model file and optimizer-state blobs.
"""

import numpy as np
import pytest

from noda.checkpoint import (
    decode_blobs,
    encode_blobs,
    load_checkpoint,
    load_model,
    save_checkpoint,
)
from noda.errors import FormatError
from noda.neural_operator import init_params
from noda.schemas.config import ModelConfig
from noda.training import AdamState


def _config(**overrides) -> ModelConfig:
    data = dict(equation="ks", ndim=1, n=16, length=2 * np.pi, width=4, modes=4, hidden=8, p=16)
    data.update(overrides)
    return ModelConfig(**data)


class TestBlobs:

    def test_round_trip_bit_exact(self):
        blobs = {"a": np.arange(6.0).reshape(2, 3), "scalar": np.array(2.5), "b.c": np.array([np.pi])}
        back = decode_blobs(encode_blobs(blobs))
        assert list(back) == list(blobs)
        for k in blobs:
            assert back[k].shape == blobs[k].shape
            assert back[k].tobytes() == blobs[k].tobytes()

    def test_bad_magic(self):
        raw = bytearray(encode_blobs({"a": np.ones(2)}))
        raw[:4] = b"NODA"
        with pytest.raises(FormatError) as exc:
            decode_blobs(bytes(raw))
        assert exc.value.offset == 0

    def test_truncated_payload(self):
        raw = encode_blobs({"a": np.ones(4)})
        with pytest.raises(FormatError):
            decode_blobs(raw[:-3])

    def test_trailing_bytes(self):
        with pytest.raises(FormatError):
            decode_blobs(encode_blobs({"a": np.ones(4)}) + b"\x01")


class TestCheckpoint:

    def test_model_round_trip(self, tmp_path):
        params = init_params(_config(), seed=3)
        save_checkpoint(tmp_path / "m.nodm", params)
        back = load_model(tmp_path / "m.nodm")
        assert back.config == params.config
        assert back.names() == params.names()
        for name in params:
            assert back[name].tobytes() == params[name].tobytes()

    def test_file_rewrite_is_identical(self, tmp_path):
        params = init_params(_config(), seed=1)
        save_checkpoint(tmp_path / "a.nodm", params)
        save_checkpoint(tmp_path / "b.nodm", load_model(tmp_path / "a.nodm"))
        assert (tmp_path / "a.nodm").read_bytes() == (tmp_path / "b.nodm").read_bytes()

    def test_random_measurement_restores_adjoint(self, tmp_path):
        params = init_params(_config(measurement="random", p=6, measurement_seed=4), seed=0)
        save_checkpoint(tmp_path / "r.nodm", params)
        back = load_model(tmp_path / "r.nodm")
        assert np.array_equal(back.c_hat, params.c_hat)

    def test_learnable_cstar_saved(self, tmp_path):
        params = init_params(_config(learnable_cstar=True), seed=0)
        save_checkpoint(tmp_path / "c.nodm", params)
        assert np.array_equal(load_model(tmp_path / "c.nodm")["gain.c_star"], np.eye(16))

    def test_adam_state_round_trip(self, tmp_path):
        params = init_params(_config(), seed=0)
        adam = AdamState.zeros(params)
        adam.m["predictor.lift.bias"] += 0.25
        adam.step = 7
        save_checkpoint(tmp_path / "s.nodm", params, adam)
        ckpt = load_checkpoint(tmp_path / "s.nodm")
        assert ckpt.adam.step == 7
        assert np.array_equal(ckpt.adam.m["predictor.lift.bias"], adam.m["predictor.lift.bias"])
        assert set(ckpt.adam.v) == set(params.names())

    def test_without_adam(self, tmp_path):
        save_checkpoint(tmp_path / "n.nodm", init_params(_config(), seed=0))
        assert load_checkpoint(tmp_path / "n.nodm").adam is None

    def test_missing_metadata(self, tmp_path):
        from noda.checkpoint import write_blobs
        write_blobs(tmp_path / "x.nodm", {"predictor.lift.weight": np.ones((2, 4))})
        with pytest.raises(FormatError):
            load_model(tmp_path / "x.nodm")
