"""
Neural Operator — learnable parameters and the prediction pathway.

Fields are batched along a leading axis, (B, n) or (B, nx, ny), and
carried channels-last inside the network, (B, *spatial, width):

  lift     : [z, x/L] @ P + b                    (pointwise)
  block ℓ  : relu(v @ W + b + F⁻¹(R · F(v)))     (no relu on the last block)
  project  : v @ Q + b_Q                          (width → 1)
  predict  : ẑ_pred = ẑ + project(blocks(lift(ẑ)))

Spectral transforms act over the spatial axes only. Nothing in the
predictor depends on the grid size, so a model trained at one
resolution evaluates at another (n ≥ 2·modes on every axis).

Parameter names are dotted paths (`predictor.blocks.0.conv.re`); the
model file stores them under the same names.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from noda.autodiff import (
    Tensor,
    as_tensor,
    concat,
    irfft,
    mode_pad,
    mode_truncate,
    relu,
    reshape,
    rfft,
    spectral_contract,
)
from noda.dataset import MeasurementOperator
from noda.errors import ShapeError
from noda.grid_fft import coordinates
from noda.schemas.config import ModelConfig

logger = logging.getLogger("noda.neural_operator")


# ============================================================
# PARAMETERS
# ============================================================

def block_prefix(index: int) -> str:
    return f"predictor.blocks.{index}"


@dataclass
class NodaParams:
    """All learnable arrays of one model, keyed by dotted name."""
    config: ModelConfig
    arrays: dict[str, np.ndarray]
    c_hat: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.arrays = {k: np.asarray(v, dtype=np.float64) for k, v in self.arrays.items()}
        if self.c_hat is None and self.config.measurement == "random":
            self.c_hat = self.measurement_operator().adjoint()

    def measurement_operator(self) -> MeasurementOperator:
        c = self.config
        return MeasurementOperator.from_name(c.measurement, c.d, seed=c.measurement_seed, p=c.p)

    def operator_for(self, d: int, name: str | None = None, seed: int | None = None) -> MeasurementOperator:
        """The operator this model was trained against, on fields of size d.

        `name` and `seed` are what the caller asked for; they must agree
        with the model. The identity follows the field size; a random
        operator is tied to the training grid.
        """
        c = self.config
        if name is not None and name != c.measurement:
            raise ValueError(f"model was trained with {c.measurement} measurements, not {name}")
        if c.measurement == "identity":
            return MeasurementOperator.identity(d)
        if seed is not None and seed != c.measurement_seed:
            raise ValueError(f"model was trained with measurement_seed={c.measurement_seed}, not {seed}")
        if d != c.d:
            raise ShapeError("random measurement operator is fixed to the training grid", (d,), (c.d,))
        return self.measurement_operator()

    def names(self) -> list[str]:
        return list(self.arrays)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.arrays)

    def n_parameters(self) -> int:
        return int(sum(a.size for a in self.arrays.values()))

    def with_arrays(self, arrays: Mapping[str, np.ndarray]) -> "NodaParams":
        missing = set(self.arrays) ^ set(arrays)
        if missing:
            raise KeyError(f"parameter names differ: {sorted(missing)}")
        return NodaParams(self.config, {k: arrays[k] for k in self.arrays}, self.c_hat)

    def copy(self) -> "NodaParams":
        return NodaParams(self.config, {k: v.copy() for k, v in self.arrays.items()}, self.c_hat)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays.values())

    def bind(self, requires_grad: bool = False) -> "BoundParams":
        """Wrap every array as a Tensor for a forward pass."""
        tensors = {k: Tensor(v, requires_grad=requires_grad) for k, v in self.arrays.items()}
        return BoundParams(self.config, tensors, self.c_hat)


@dataclass(frozen=True)
class SpectralConvParams:
    re: Tensor
    im: Tensor

    @property
    def modes(self) -> int:
        return self.re.shape[-3]


@dataclass(frozen=True)
class FnoBlockParams:
    weight: Tensor
    bias: Tensor
    conv: SpectralConvParams


class BoundParams(Mapping[str, Tensor]):
    """Read-only name → Tensor view used by every forward function."""

    def __init__(self, config: ModelConfig, tensors: dict[str, Tensor], c_hat: np.ndarray | None):
        self.config = config
        self.c_hat = c_hat
        self._tensors = tensors

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def block(self, index: int) -> FnoBlockParams:
        p = block_prefix(index)
        return FnoBlockParams(
            weight=self[f"{p}.w.weight"],
            bias=self[f"{p}.w.bias"],
            conv=SpectralConvParams(re=self[f"{p}.conv.re"], im=self[f"{p}.conv.im"]),
        )


def as_bound(params: "NodaParams | BoundParams") -> BoundParams:
    return params.bind() if isinstance(params, NodaParams) else params


def spectral_weight_shape(config: ModelConfig) -> tuple[int, ...]:
    """(k,) in 1D, (2k, k) in 2D: both signs on full axes, non-negative on the halved one."""
    k = config.modes
    modes = (k,) if config.ndim == 1 else (2 * k, k)
    return (*modes, config.width, config.width)


def init_params(config: ModelConfig, seed: int = 0) -> NodaParams:
    """Seeded initialisation: uniform ±1/√fan_in for dense maps, rand/width² for spectral weights."""
    rng = np.random.default_rng(seed)

    def dense(fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    w, d, p, h = config.width, config.d, config.p, config.hidden
    arrays: dict[str, np.ndarray] = {
        "predictor.lift.weight": dense(config.in_channels, (config.in_channels, w)),
        "predictor.lift.bias": dense(config.in_channels, (w,)),
    }
    spectral_scale = 1.0 / (w * w)
    for i in range(config.n_blocks):
        prefix = block_prefix(i)
        arrays[f"{prefix}.w.weight"] = dense(w, (w, w))
        arrays[f"{prefix}.w.bias"] = dense(w, (w,))
        arrays[f"{prefix}.conv.re"] = spectral_scale * rng.random(spectral_weight_shape(config))
        arrays[f"{prefix}.conv.im"] = spectral_scale * rng.random(spectral_weight_shape(config))
    arrays["predictor.proj.weight"] = dense(w, (w, 1))
    arrays["predictor.proj.bias"] = dense(w, (1,))

    arrays["measurement.fc1.weight"] = dense(d, (d, h))
    arrays["measurement.fc1.bias"] = dense(d, (h,))
    arrays["measurement.fc2.weight"] = dense(h, (h, p))
    arrays["measurement.fc2.bias"] = dense(h, (p,))

    arrays["gain.w_z"] = dense(p, (p, d))
    arrays["gain.w_y"] = dense(p, (p, d))
    arrays["gain.b"] = np.zeros(d)

    params = NodaParams(config, arrays)
    if config.learnable_cstar:
        c_hat = params.c_hat
        params.arrays["gain.c_star"] = np.eye(d) if c_hat is None else c_hat.copy()

    logger.debug("Initialised %d parameters", params.n_parameters(), extra={"seed": seed})
    return params


def zero_params(config: ModelConfig) -> NodaParams:
    """Same layout as init_params with every array zero."""
    params = init_params(config)
    return params.with_arrays({k: np.zeros_like(v) for k, v in params.arrays.items()})


# ============================================================
# FORWARD PASS
# ============================================================

def spectral_conv(v, conv: SpectralConvParams) -> Tensor:
    """F⁻¹(R · truncate(F(v))) over the spatial axes of a (B, *spatial, width) field."""
    v = as_tensor(v)
    spatial = v.shape[1:-1]
    k = conv.modes
    if any(n < 2 * k for n in spatial):
        raise ShapeError(f"{k} modes need at least {2 * k} points per axis", spatial)
    axes = tuple(range(1, 1 + len(spatial)))
    spec = rfft(v, axes)
    mixed = spectral_contract(mode_truncate(spec, axes, k), conv.re, conv.im)
    out_shape = (*spec.shape[:-1], conv.re.shape[-1])
    return irfft(mode_pad(mixed, axes, k, out_shape), axes, spatial)


def fno_block(v, block: FnoBlockParams, activate: bool = True) -> Tensor:
    """relu(v @ W + b + spectral_conv(v)); the relu is skipped when activate is False."""
    out = as_tensor(v) @ block.weight + block.bias + spectral_conv(v, block.conv)
    return relu(out) if activate else out


def lift(z: Tensor, params: BoundParams) -> Tensor:
    x = reshape(z, (*z.shape, 1))
    if params.config.use_coords:
        coords = np.broadcast_to(coordinates(z.shape[1:]), (*z.shape, z.ndim - 1))
        x = concat([x, Tensor(coords)], axis=-1)
    return x @ params["predictor.lift.weight"] + params["predictor.lift.bias"]


def predictor(z: Tensor, params: BoundParams) -> Tensor:
    """The learned increment W(ẑ) for a batch (B, *spatial)."""
    v = lift(z, params)
    n_blocks = params.config.n_blocks
    for i in range(n_blocks):
        v = fno_block(v, params.block(i), activate=i < n_blocks - 1)
    out = v @ params["predictor.proj.weight"] + params["predictor.proj.bias"]
    return reshape(out, z.shape)


def predict_step(z_prev, params: "NodaParams | BoundParams") -> Tensor:
    """ẑ_pred = ẑ + W(ẑ); accepts one field or a batch."""
    params = as_bound(params)
    z = as_tensor(z_prev)
    ndim = params.config.ndim
    if z.ndim == ndim:
        return reshape(predict_step(reshape(z, (1, *z.shape)), params), z.shape)
    if z.ndim != ndim + 1:
        raise ShapeError(f"expected a {ndim}D field or a batch of them", z.shape)
    return z + predictor(z, params)
