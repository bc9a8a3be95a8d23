"""
2D incompressible Navier–Stokes in vorticity form on the unit torus.

  ∂z/∂t + u·∇z = ν Δz + f,   ∇·u = 0,   ν = 1/Re
  f(x, y) = sin(2π(x+y)) + cos(2π(x+y))

Pseudo-spectral stepping: velocity from the streamfunction
(ψ̂ = ẑ/|k|², k ≠ 0; u = ∂ψ/∂y, v = −∂ψ/∂x), advection dealiased with
the 2/3 rule and advanced with Heun's predictor–corrector, diffusion
treated Crank–Nicolson (average of implicit and explicit ν Δ in
spectral space). The mean vorticity mode is held at zero.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from noda.errors import BlowUpError
from noda.grid_fft import Grid2D, dealias_mask, rdealias_mask
from noda.solvers import Equation, Stepper


@dataclass(frozen=True)
class NSConfig:
    """Navier–Stokes generation settings."""
    grid: Grid2D = Grid2D(64, 64)
    h: float = 1.0
    re: float = 40.0
    inner_steps: int = 16
    forcing: bool = True
    nonlinear: bool = True

    def __post_init__(self):
        if not self.re > 0:
            raise ValueError(f"Reynolds number must be positive, got {self.re}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if int(self.inner_steps) != self.inner_steps or self.inner_steps < 1:
            raise ValueError(f"inner_steps must be a positive integer, got {self.inner_steps}")

    @property
    def nu(self) -> float:
        return 1.0 / self.re


def forcing_field(grid: Grid2D) -> np.ndarray:
    x = np.arange(grid.nx) * grid.length / grid.nx
    y = np.arange(grid.ny) * grid.length / grid.ny
    xx, yy = np.meshgrid(x, y, indexing="ij")
    phase = 2.0 * np.pi * (xx + yy)
    return np.sin(phase) + np.cos(phase)


class _SpectralOps:
    """Wavenumber tables for the rfft2 layout of one grid."""

    def __init__(self, grid: Grid2D):
        self.shape = grid.shape
        jx = np.fft.fftfreq(grid.nx, d=1.0 / grid.nx)
        jy = np.arange(grid.ny // 2 + 1, dtype=float)
        scale = 2.0 * np.pi / grid.length
        kx, ky = np.meshgrid(scale * jx, scale * jy, indexing="ij")
        self.lap = kx**2 + ky**2
        self.lap_inv = np.zeros_like(self.lap)
        self.lap_inv[self.lap > 0] = 1.0 / self.lap[self.lap > 0]

        # first derivatives drop the Nyquist rows/columns
        kx_d = kx.copy()
        kx_d[grid.nx // 2, :] = 0.0
        ky_d = ky.copy()
        ky_d[:, -1] = 0.0
        self.ikx = 1j * kx_d
        self.iky = 1j * ky_d
        self.dealias = dealias_mask(grid.nx)[:, None] & rdealias_mask(grid.ny)[None, :]

    def irfft(self, spec: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(spec, s=self.shape)

    def velocity(self, w_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        psi_hat = w_hat * self.lap_inv
        return self.irfft(self.iky * psi_hat), self.irfft(-self.ikx * psi_hat)

    def advection(self, w_hat: np.ndarray) -> np.ndarray:
        u, v = self.velocity(w_hat)
        w_x = self.irfft(self.ikx * w_hat)
        w_y = self.irfft(self.iky * w_hat)
        return self.dealias * np.fft.rfft2(u * w_x + v * w_y)


class CrankNicolsonStepper(Stepper):
    """Heun advection + Crank–Nicolson diffusion."""

    equation = Equation.NS

    def __init__(self, config: NSConfig):
        self.config = config
        self.ops = _SpectralOps(config.grid)
        self.dt = config.h / config.inner_steps
        half = 0.5 * self.dt * config.nu * self.ops.lap
        self._explicit = 1.0 - half
        self._implicit_inv = 1.0 / (1.0 + half)
        if config.forcing:
            self._f_hat = np.fft.rfft2(forcing_field(config.grid))
        else:
            self._f_hat = np.zeros_like(self.ops.lap, dtype=complex)

    @property
    def inner_steps(self) -> int:
        return self.config.inner_steps

    def _advect(self, w_hat: np.ndarray) -> np.ndarray:
        if not self.config.nonlinear:
            return np.zeros_like(w_hat)
        return self.ops.advection(w_hat)

    def step_spectral(self, w_hat: np.ndarray) -> np.ndarray:
        dt = self.dt
        adv = self._advect(w_hat)
        base = dt * self._f_hat + self._explicit * w_hat
        w_tilde = (base - dt * adv) * self._implicit_inv
        adv_tilde = self._advect(w_tilde)
        w_new = (base - 0.5 * dt * (adv + adv_tilde)) * self._implicit_inv
        w_new[0, 0] = 0.0
        return w_new

    def step(self, state: np.ndarray) -> np.ndarray:
        w_hat = np.fft.rfft2(np.asarray(state, dtype=np.float64))
        return self.ops.irfft(self.step_spectral(w_hat))

    def advance_frame(self, state: np.ndarray, frame: int) -> np.ndarray:
        w_hat = np.fft.rfft2(np.asarray(state, dtype=np.float64))
        for _ in range(self.inner_steps):
            w_hat = self.step_spectral(w_hat)
        out = self.ops.irfft(w_hat)
        if not np.all(np.isfinite(out)):
            raise BlowUpError(frame, "ns")
        return out


@functools.lru_cache(maxsize=8)
def _cached_stepper(config: NSConfig) -> CrankNicolsonStepper:
    return CrankNicolsonStepper(config)


def ns_crank_nicolson_step(vorticity: np.ndarray, config: NSConfig, frame: int = 0) -> np.ndarray:
    """One inner NS substep; raises BlowUpError naming `frame` on NaN/Inf."""
    vorticity = np.asarray(vorticity, dtype=np.float64)
    if vorticity.shape != config.grid.shape:
        raise ValueError(
            f"vorticity shape {vorticity.shape} does not match grid {config.grid.shape}"
        )
    if not np.all(np.isfinite(vorticity)):
        raise BlowUpError(frame, "ns")
    return _cached_stepper(config).step(vorticity)


def recover_velocity(vorticity: np.ndarray, grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    """Divergence-free velocity (u, v) from a vorticity field."""
    ops = _SpectralOps(grid)
    return ops.velocity(np.fft.rfft2(np.asarray(vorticity, dtype=np.float64)))


def divergence(u: np.ndarray, v: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Spectral ∂u/∂x + ∂v/∂y."""
    ops = _SpectralOps(grid)
    return ops.irfft(ops.ikx * np.fft.rfft2(u) + ops.iky * np.fft.rfft2(v))
