"""
Solver factory, trajectory rollout and parallel dataset generation.

Trajectory i of a generated set uses seed = base_seed + i for its
initial condition, so generation is reproducible regardless of the
number of worker threads.
"""

from __future__ import annotations

import concurrent.futures
import logging
import time
from typing import Union

import numpy as np

from noda.config import settings
from noda.dataset import Equation, Trajectory
from noda.grid_fft import Grid1D, Grid2D
from noda.solvers import Stepper
from noda.solvers.etdrk4 import ETDRK4Stepper, KdVConfig, KSConfig
from noda.solvers.grf import GrfSpec, default_gaussian_amplitude, sample_initial_condition
from noda.solvers.navier_stokes import CrankNicolsonStepper, NSConfig

logger = logging.getLogger("noda.solvers")

SolverConfig = Union[KSConfig, KdVConfig, NSConfig]

# Domain lengths per equation (NS lives on the unit torus)
DOMAIN_LENGTH = {
    Equation.KS: 64.0 * np.pi,
    Equation.KDV: 128.0,
    Equation.NS: 1.0,
}

# Initial amplitudes for the band-limited 1D samplers
_SINE_AMPLITUDE = {Equation.KS: 2.0, Equation.KDV: 0.5}


def get_stepper(equation: Equation | str, config: SolverConfig) -> Stepper:
    """Factory — returns the integrator for an equation/config pair."""
    equation = Equation.parse(equation)
    if equation == Equation.KS and isinstance(config, KSConfig):
        return ETDRK4Stepper(config)
    if equation == Equation.KDV and isinstance(config, KdVConfig):
        return ETDRK4Stepper(config)
    if equation == Equation.NS and isinstance(config, NSConfig):
        return CrankNicolsonStepper(config)
    raise ValueError(f"config {type(config).__name__} does not match equation {equation.label}")


def default_config(
    equation: Equation | str,
    resolution: int | tuple[int, int] | None = None,
    h: float | None = None,
    re: float | None = None,
    inner_steps: int | None = None,
) -> SolverConfig:
    """Shipped configuration with optional overrides."""
    equation = Equation.parse(equation)
    overrides = {}
    if h is not None:
        overrides["h"] = h
    if inner_steps is not None:
        overrides["inner_steps"] = inner_steps

    if equation == Equation.NS:
        if re is not None:
            overrides["re"] = re
        if resolution is not None:
            nx, ny = (resolution, resolution) if isinstance(resolution, int) else resolution
            overrides["grid"] = Grid2D(nx, ny)
        return NSConfig(**overrides)

    if resolution is not None:
        if not isinstance(resolution, int):
            if len(resolution) != 1:
                raise ValueError(f"{equation.label} takes a single resolution, got {resolution}")
            resolution = resolution[0]
        overrides["grid"] = Grid1D(resolution, DOMAIN_LENGTH[equation])
    cls = KSConfig if equation == Equation.KS else KdVConfig
    return cls(**overrides)


def default_grf(equation: Equation | str, seed: int = 0) -> GrfSpec:
    """Initial-condition sampler used for an equation's datasets."""
    equation = Equation.parse(equation)
    if equation == Equation.NS:
        decay, tau = 2.5, 7.0
        return GrfSpec(kind="gaussian", decay=decay, tau=tau, seed=seed,
                       amplitude=default_gaussian_amplitude(decay, tau, ndim=2))
    return GrfSpec(kind="sine", amplitude=_SINE_AMPLITUDE[equation], n_modes=10, seed=seed)


def frame_count(t_f: float, h: float) -> int:
    """Number of recorded frames for a horizon t_f (a non-negative multiple of h)."""
    if t_f < 0:
        raise ValueError(f"t_f must be non-negative, got {t_f}")
    steps = t_f / h
    n = int(round(steps))
    if abs(steps - n) > 1e-9 * max(1.0, steps):
        raise ValueError(f"t_f={t_f} is not a multiple of h={h}")
    return n + 1


def rollout(
    equation: Equation | str,
    config: SolverConfig,
    z0: np.ndarray,
    t_f: float,
    seed: int = 0,
) -> Trajectory:
    """Integrate from z0 and record frames at 0, h, …, t_f."""
    equation = Equation.parse(equation)
    stepper = get_stepper(equation, config)
    n_frames = frame_count(t_f, config.h)
    state = np.asarray(z0, dtype=np.float64)
    if state.shape != config.grid.shape:
        raise ValueError(f"z0 shape {state.shape} does not match grid {config.grid.shape}")

    frames = np.empty((n_frames, *config.grid.shape))
    frames[0] = state
    for k in range(1, n_frames):
        state = stepper.advance_frame(state, k)
        frames[k] = state
    return Trajectory(equation=equation, grid=config.grid, h=config.h, frames=frames, seed=seed)


def generate_trajectories(
    equation: Equation | str,
    config: SolverConfig,
    n_traj: int,
    t_f: float,
    base_seed: int = 0,
    workers: int | None = None,
    grf: GrfSpec | None = None,
) -> list[Trajectory]:
    """Generate n_traj trajectories in index order using a thread pool."""
    equation = Equation.parse(equation)
    template = grf or default_grf(equation)
    workers = workers or settings.WORKERS

    def _one(index: int) -> Trajectory:
        seed = base_seed + index
        z0 = sample_initial_condition(template.with_seed(seed), config.grid)
        return rollout(equation, config, z0, t_f, seed=seed)

    start = time.monotonic()
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        trajectories = list(pool.map(_one, range(n_traj)))
    logger.info(
        "Generated %d %s trajectories", n_traj, equation.label,
        extra={"equation": equation.label, "n_frames": frame_count(t_f, config.h),
               "seed": base_seed, "duration_ms": round(1000 * (time.monotonic() - start))},
    )
    return trajectories
