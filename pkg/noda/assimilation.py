"""
Assimilation — observer-style correction and the recursive estimator.

  ŷ      = E(ẑ_pred)                        two affine layers, relu between
  u      = y − ŷ                             innovation
  gate   = tanh(ŷ W_z + y W_y + b)           ∈ (−1, 1)^d
  ẑ      = ẑ_pred + gate ⊙ (u Ĉ*)

Ĉ* is the adjoint of the known measurement operator (u itself for the
identity) or, with learnable_cstar, the trained `gain.c_star` matrix.
E and the gain act on flattened fields, so 2D fields use d = nx·ny.

The rollout starts from the true initial frame, predicts every step
and corrects exactly at the frames the Schedule marks: the warm-up
frames [1, t_H] and the sampled assimilation frames.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from noda.autodiff import Tensor, as_tensor, relu, reshape, tanh
from noda.dataset import Equation, ObservationSet, Schedule, Trajectory
from noda.errors import BlowUpError, MissingObservationError, ShapeError
from noda.grid_fft import Grid
from noda.neural_operator import BoundParams, NodaParams, as_bound, predict_step

logger = logging.getLogger("noda.assimilation")


def _batched(z: Tensor, ndim: int) -> tuple[Tensor, bool]:
    if z.ndim == ndim:
        return reshape(z, (1, *z.shape)), True
    if z.ndim != ndim + 1:
        raise ShapeError(f"expected a {ndim}D field or a batch of them", z.shape)
    return z, False


def _vector_batch(y, batch: int, p: int, what: str) -> Tensor:
    y = as_tensor(y)
    if y.ndim == 1:
        y = reshape(y, (1, y.shape[0]))
    if y.shape != (batch, p):
        raise ShapeError(f"{what} must be (batch, p)", y.shape, (batch, p))
    return y


# ============================================================
# MEASUREMENT NET E
# ============================================================

def estimate_measurement(params: "NodaParams | BoundParams", z_pred) -> Tensor:
    """ŷ = relu(z W₁ + b₁) W₂ + b₂ on the flattened field."""
    params = as_bound(params)
    z, single = _batched(as_tensor(z_pred), params.config.ndim)
    d = params.config.d
    if int(np.prod(z.shape[1:])) != d:
        raise ShapeError("field size does not match the model's d", z.shape, (d,))
    x = reshape(z, (z.shape[0], d))
    hidden = relu(x @ params["measurement.fc1.weight"] + params["measurement.fc1.bias"])
    y_hat = hidden @ params["measurement.fc2.weight"] + params["measurement.fc2.bias"]
    return reshape(y_hat, (params.config.p,)) if single else y_hat


# ============================================================
# GAIN K
# ============================================================

def lift_innovation(params: BoundParams, u: Tensor) -> Tensor:
    """u Ĉ*: (B, p) -> (B, d)."""
    if "gain.c_star" in params:
        return u @ params["gain.c_star"]
    if params.c_hat is None:
        return u
    return u @ Tensor(params.c_hat)


def gain_apply(
    params: "NodaParams | BoundParams",
    z_pred,
    y,
    u,
    y_hat=None,
) -> Tensor:
    """tanh(E(ẑ_pred) W_z + y W_y + b) ⊙ (u Ĉ*), shaped like ẑ_pred."""
    params = as_bound(params)
    cfg = params.config
    z, single = _batched(as_tensor(z_pred), cfg.ndim)
    batch = z.shape[0]
    y = _vector_batch(y, batch, cfg.p, "y")
    u = _vector_batch(u, batch, cfg.p, "innovation")
    if y_hat is None:
        y_hat = estimate_measurement(params, z)
    y_hat = _vector_batch(y_hat, batch, cfg.p, "estimated measurement")

    gate = tanh(y_hat @ params["gain.w_z"] + y @ params["gain.w_y"] + params["gain.b"])
    correction = reshape(gate * lift_innovation(params, u), z.shape)
    return reshape(correction, z.shape[1:]) if single else correction


def correct_step(params: "NodaParams | BoundParams", z_pred, y) -> Tensor:
    """ẑ = ẑ_pred + K(ẑ_pred)[y − E(ẑ_pred)]."""
    params = as_bound(params)
    z_pred = as_tensor(z_pred)
    y_hat = estimate_measurement(params, z_pred)
    u = as_tensor(y) - y_hat
    return z_pred + gain_apply(params, z_pred, y, u, y_hat=y_hat)


def assimilate_step(params: "NodaParams | BoundParams", z_prev, y=None, corrector: bool = True) -> Tensor:
    """One recursive step: predict, then correct when a measurement is given."""
    z_pred = predict_step(z_prev, params)
    if y is None or not corrector:
        return z_pred
    return correct_step(params, z_pred, y)


# ============================================================
# RECURSIVE ROLLOUT
# ============================================================

@dataclass(frozen=True)
class RolloutState:
    """Current estimate ẑ_{t_k} at frame k of a schedule."""
    estimate: np.ndarray
    frame: int
    schedule: Schedule
    corrections: int = 0

    def __post_init__(self):
        if not 0 <= self.frame <= self.schedule.t_f:
            raise ValueError(f"frame {self.frame} outside [0, {self.schedule.t_f}]")

    @property
    def done(self) -> bool:
        return self.frame >= self.schedule.t_f

    def advance(
        self,
        params: "NodaParams | BoundParams",
        observations: ObservationSet | None,
        corrector: bool = True,
    ) -> "RolloutState":
        k = self.frame + 1
        z = predict_step(self.estimate, params)
        corrected = corrector and self.schedule.is_corrected(k)
        if corrected:
            if observations is None:
                raise MissingObservationError(f"frame {k} is scheduled for correction but no observations were given")
            z = correct_step(params, z, observations.at(k))
        estimate = z.value
        if not np.all(np.isfinite(estimate)):
            raise BlowUpError(k, "noda")
        return replace(self, estimate=estimate, frame=k,
                       corrections=self.corrections + int(corrected))


def rollout(
    params: "NodaParams | BoundParams",
    z0: np.ndarray,
    observations: ObservationSet | None,
    schedule: Schedule,
    *,
    equation: Equation,
    grid: Grid,
    h: float,
    seed: int = 0,
    corrector: bool = True,
) -> Trajectory:
    """Recursive estimate ẑ_{t_0..t_f}; ẑ_{t_0} = z0, correct only at scheduled frames."""
    params = as_bound(params)
    z0 = np.asarray(z0, dtype=np.float64)
    if z0.shape != grid.shape:
        raise ShapeError("z0 does not match the grid", z0.shape, grid.shape)
    state = RolloutState(estimate=z0, frame=0, schedule=schedule)
    frames = np.empty((schedule.t_f + 1, *grid.shape))
    frames[0] = z0
    while not state.done:
        state = state.advance(params, observations, corrector=corrector)
        frames[state.frame] = state.estimate
    logger.debug(
        "Rollout finished with %d corrections", state.corrections,
        extra={"n_frames": schedule.t_f + 1, "t_h": schedule.t_h, "alpha": schedule.alpha},
    )
    return Trajectory(equation=equation, grid=grid, h=h, frames=frames, seed=seed)


def rollout_from_truth(
    params: "NodaParams | BoundParams",
    truth: Trajectory,
    observations: ObservationSet | None,
    schedule: Schedule,
    corrector: bool = True,
) -> Trajectory:
    """Rollout initialised with ẑ_{t_0} = z_D(t_0), metadata taken from the truth."""
    if schedule.t_f >= truth.n_frames:
        raise ValueError(f"schedule runs to frame {schedule.t_f} but the trajectory has {truth.n_frames}")
    return rollout(params, truth.frames[0], observations, schedule, equation=truth.equation,
                   grid=truth.grid, h=truth.h, seed=truth.seed, corrector=corrector)
