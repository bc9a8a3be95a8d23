"""
Training — two-term loss, Adam, step-decay schedule, truncated BPTT.

  J = (1/SN) Σ_i Σ_{k≤N} ‖ẑ_k − z_D(t_k)‖₂ + (λ/SH) Σ_i Σ_{k≤H} ‖y(t_k) − E(ẑ_k)‖₂

Norms are un-squared. Each batch item is a trajectory segment started
at a random offset; its first frame initialises the estimate, frames
1..H are assimilated and the rest are predicted. Gradients flow through
the corrections and are truncated every `bptt_window` steps: the state
is carried detached into the next window and the window gradients are
summed, with every window using the global S·N and S·H normalisers.

Usage:
    result = train(trajectories, TrainConfig(epochs=50, width=32, modes=12))
    result.history          # mean batch loss per epoch
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from noda.assimilation import assimilate_step, estimate_measurement
from noda.autodiff import Tape, Tensor, l2_norm, reduce_sum
from noda.dataset import Equation, MeasurementOperator, Trajectory, add_noise_snr
from noda.errors import NumericalError
from noda.grid_fft import Grid1D
from noda.neural_operator import BoundParams, NodaParams, init_params
from noda.schemas.config import ModelConfig, TrainConfig

logger = logging.getLogger("noda.training")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


# ============================================================
# CONFIGURATION
# ============================================================

# Warm-up frames used in training (h = 0.25 s for KS, 0.5 s for KdV, 1 s for NS)
_REFERENCE_T_H = {Equation.KS: 500, Equation.KDV: 80, Equation.NS: 300}
_REFERENCE_SEGMENT = {Equation.NS: 500}


def reference_config(equation: Equation | str, **overrides) -> TrainConfig:
    """Reference training schedule for an equation, with optional overrides."""
    equation = Equation.parse(equation)
    data = {
        "t_h_train": _REFERENCE_T_H[equation],
        "segment_frames": _REFERENCE_SEGMENT.get(equation),
    }
    data.update(overrides)
    return TrainConfig(**data)


def model_config_for(trajectory: Trajectory, config: TrainConfig) -> ModelConfig:
    """Architecture matching a trajectory's grid and the run's settings."""
    grid = trajectory.grid
    if isinstance(grid, Grid1D):
        ndim, n = 1, grid.n
    else:
        if grid.nx != grid.ny:
            raise ValueError(f"square grids only, got {grid.nx}x{grid.ny}")
        ndim, n = 2, grid.nx
    d = grid.size
    p = d if config.measurement == "identity" else (config.measurement_p or d)
    return ModelConfig(
        equation=trajectory.equation.label, ndim=ndim, n=n, length=grid.length,
        width=config.width, modes=config.modes, hidden=config.hidden,
        use_coords=config.use_coords, measurement=config.measurement,
        measurement_seed=config.measurement_seed, p=p,
        learnable_cstar=config.learnable_cstar,
    )


# ============================================================
# LOSS
# ============================================================

def loss_J(
    estimates: Sequence[Tensor],
    measurements: Mapping[int, np.ndarray],
    truth: Sequence[np.ndarray],
    params: BoundParams,
    lam: float,
    n_norm: float | None = None,
    h_norm: float | None = None,
) -> Tensor:
    """
    Two-term loss over a batch of estimated frames.

    estimates[j] and truth[j] are (B, *spatial); measurements maps an
    estimate index j to its observation y (B, p). Normalisers default
    to B·len(estimates) and B·len(measurements).
    """
    if len(estimates) != len(truth):
        raise ValueError(f"{len(estimates)} estimates vs {len(truth)} truth frames")
    if not estimates:
        raise ValueError("loss_J needs at least one estimated frame")
    batch = estimates[0].shape[0]
    n_norm = batch * len(estimates) if n_norm is None else n_norm
    h_norm = batch * len(measurements) if h_norm is None else h_norm
    if lam > 0 and h_norm == 0:
        raise ValueError("measurement term needs H > 0 observed frames when lam > 0")

    spatial = tuple(range(1, estimates[0].ndim))
    reconstruction = None
    for est, z_true in zip(estimates, truth):
        term = reduce_sum(l2_norm(est - z_true, axis=spatial))
        reconstruction = term if reconstruction is None else reconstruction + term
    loss = reconstruction * (1.0 / n_norm)

    if lam > 0 and measurements:
        fit = None
        for j, y in measurements.items():
            term = reduce_sum(l2_norm(Tensor(y) - estimate_measurement(params, estimates[j]), axis=-1))
            fit = term if fit is None else fit + term
        loss = loss + fit * (lam / h_norm)
    return loss


# ============================================================
# OPTIMIZER
# ============================================================

@dataclass
class AdamState:
    """First/second moments per parameter name plus the step count."""
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros(cls, params: NodaParams | Mapping[str, np.ndarray]) -> "AdamState":
        arrays = params.arrays if isinstance(params, NodaParams) else params
        return cls(m={k: np.zeros_like(a) for k, a in arrays.items()},
                   v={k: np.zeros_like(a) for k, a in arrays.items()})


def adam_step(
    params: NodaParams | Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
):
    """Bias-corrected Adam update; returns (new params, new state)."""
    arrays = params.arrays if isinstance(params, NodaParams) else params
    step = state.step + 1
    m, v, updated = {}, {}, {}
    for name, value in arrays.items():
        g = np.asarray(grads[name], dtype=np.float64)
        m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        v[name] = beta2 * state.v[name] + (1.0 - beta2) * g * g
        m_hat = m[name] / (1.0 - beta1**step)
        v_hat = v[name] / (1.0 - beta2**step)
        updated[name] = value - lr * m_hat / (np.sqrt(v_hat) + eps)
    new_state = AdamState(m=m, v=v, step=step)
    if isinstance(params, NodaParams):
        return params.with_arrays(updated), new_state
    return updated, new_state


def lr_at_epoch(config: TrainConfig, epoch: int) -> float:
    """lr · decay^⌊epoch / every⌋."""
    return config.lr * config.lr_decay ** (epoch // config.lr_decay_every)


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_by_global_norm(grads: Mapping[str, np.ndarray], max_norm: float | None) -> tuple[dict, float]:
    norm = global_norm(grads)
    if max_norm is None or norm <= max_norm or norm == 0.0:
        return dict(grads), norm
    scale = max_norm / norm
    if np.isfinite(norm):
        logger.warning("Gradients clipped: global norm %.4g > %.4g", norm, max_norm, extra={"grad_norm": norm})
    return {k: g * scale for k, g in grads.items()}, norm


# ============================================================
# ROLLOUT LOSS
# ============================================================

def window_loss(
    params: BoundParams,
    z_start: np.ndarray,
    truth: np.ndarray,
    y: np.ndarray,
    n_observed: int,
    lam: float,
    n_norm: float | None = None,
    h_norm: float | None = None,
) -> tuple[Tensor, Tensor]:
    """
    Recursive rollout over one window and its loss.

    z_start (B, *spatial) seeds the window; truth (B, n, *spatial) and
    y (B, n, p) cover the n frames it estimates, the first `n_observed`
    of which are corrected. Returns (loss, final state).
    """
    z = Tensor(z_start)
    estimates, measurements = [], {}
    for j in range(truth.shape[1]):
        y_j = y[:, j] if j < n_observed else None
        z = assimilate_step(params, z, y_j)
        estimates.append(z)
        if y_j is not None:
            measurements[j] = y_j
    frames = [truth[:, j] for j in range(truth.shape[1])]
    return loss_J(estimates, measurements, frames, params, lam, n_norm, h_norm), z


@dataclass
class TrainResult:
    params: NodaParams
    history: list[float]
    adam: AdamState
    grad_norms: list[float] = field(default_factory=list)


def _noisy_measurements(trajectories: Sequence[Trajectory], op: MeasurementOperator,
                        snr_db: float, seed: int) -> list[np.ndarray]:
    return [add_noise_snr(op.apply(t.frames), snr_db, seed=seed + 7919 * i)
            for i, t in enumerate(trajectories)]


def train(
    trajectories: Sequence[Trajectory],
    config: TrainConfig,
    params: NodaParams | None = None,
    adam: AdamState | None = None,
    on_epoch: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Fit NODA parameters on a set of trajectories; returns parameters and loss history."""
    if not trajectories:
        raise ValueError("training set is empty")
    n_frames = min(t.n_frames for t in trajectories)
    segment = min(config.segment_frames or n_frames, n_frames)
    if segment < 2:
        raise ValueError("training trajectories need at least two frames")
    n_steps = segment - 1
    n_obs = min(config.t_h_train, n_steps)
    if config.lam > 0 and n_obs == 0:
        raise ValueError("lam > 0 requires t_h_train > 0")
    if n_obs < config.t_h_train:
        logger.info("Warm-up clipped to %d frames by segment length", n_obs, extra={"t_h": n_obs})

    model_config = model_config_for(trajectories[0], config)
    params = params or init_params(model_config, seed=config.seed)
    adam = adam or AdamState.zeros(params)
    op = params.measurement_operator()
    ys = _noisy_measurements(trajectories, op, config.snr_db, config.seed)

    rng = np.random.default_rng(config.seed)
    history: list[float] = []
    grad_norms: list[float] = []
    n_traj = len(trajectories)

    for epoch in range(config.epochs):
        start_time = time.monotonic()
        lr = lr_at_epoch(config, epoch)
        order = rng.permutation(n_traj)
        batch_losses = []
        for b, lo in enumerate(range(0, n_traj, config.batch_size)):
            idx = order[lo:lo + config.batch_size]
            offsets = rng.integers(0, n_frames - segment + 1, size=len(idx))
            segs = np.stack([trajectories[i].frames[o:o + segment] for i, o in zip(idx, offsets)])
            y_seg = np.stack([ys[i][o + 1:o + segment] for i, o in zip(idx, offsets)])

            batch = len(idx)
            n_norm, h_norm = batch * n_steps, batch * n_obs
            grads = {k: np.zeros_like(a) for k, a in params.arrays.items()}
            z = segs[:, 0]
            total = 0.0
            for w0 in range(0, n_steps, config.bptt_window):
                w1 = min(w0 + config.bptt_window, n_steps)
                with Tape() as tape:
                    bound = params.bind(requires_grad=True)
                    loss, z_end = window_loss(
                        bound, z, segs[:, 1 + w0:1 + w1], y_seg[:, w0:w1],
                        n_observed=max(0, n_obs - w0), lam=config.lam,
                        n_norm=n_norm, h_norm=h_norm,
                    )
                value = loss.item()
                if not np.isfinite(value):
                    raise NumericalError(f"non-finite loss at epoch {epoch} batch {b}")
                window_grads = tape.backward(loss)
                for name in grads:
                    g = window_grads.get(bound[name])
                    if g is not None:
                        grads[name] += g
                total += value
                z = z_end.value

            grads, norm = clip_by_global_norm(grads, config.grad_clip)
            if not np.isfinite(norm):
                raise NumericalError(f"non-finite gradient at epoch {epoch} batch {b}")
            params, adam = adam_step(params, grads, adam, lr)
            batch_losses.append(total)
            grad_norms.append(norm)
            logger.debug("Batch done", extra={"epoch": epoch, "batch": b, "loss": total, "grad_norm": norm})

        epoch_loss = float(np.mean(batch_losses))
        history.append(epoch_loss)
        logger.info(
            "Epoch %d/%d loss %.6g", epoch + 1, config.epochs, epoch_loss,
            extra={"epoch": epoch, "loss": epoch_loss, "lr": lr,
                   "duration_ms": round(1000 * (time.monotonic() - start_time))},
        )
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss)

    return TrainResult(params=params, history=history, adam=adam, grad_norms=grad_norms)
