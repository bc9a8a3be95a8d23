"""
Initial condition samplers.

Two families, both zero-mean, periodic and deterministic per seed:

  gaussian : Gaussian random field with spectral amplitude
             amplitude · (|k|² + τ²)^(−decay/2) and complex unit normal
             draws per mode (NS default: τ=7, decay=2.5).
  sine     : band-limited sum of the first `n_modes` Fourier modes with
             unit-variance Gaussian cosine/sine amplitudes, rescaled so
             max|z0| == amplitude (KS and KdV default).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from noda.errors import GridError
from noda.grid_fft import Grid, Grid1D, wavenumbers


@dataclass(frozen=True)
class GrfSpec:
    """Parameters of an initial-condition draw."""
    kind: Literal["gaussian", "sine"] = "gaussian"
    decay: float = 2.5
    amplitude: float = 1.0
    tau: float = 7.0
    seed: int = 0
    n_modes: int = 10

    def with_seed(self, seed: int) -> "GrfSpec":
        return GrfSpec(self.kind, self.decay, self.amplitude, self.tau, int(seed), self.n_modes)


def default_gaussian_amplitude(decay: float, tau: float, ndim: int) -> float:
    """Amplitude making the field O(1) for the given decay and τ."""
    return float(tau ** (decay - ndim / 2.0))


def sample_initial_condition(grf: GrfSpec, grid: Grid) -> np.ndarray:
    """Draw one zero-mean real field on `grid`."""
    rng = np.random.default_rng(grf.seed)
    if grf.amplitude == 0:
        return np.zeros(grid.shape)

    if grf.kind == "sine":
        return _sample_sine(grf, grid, rng)
    if grf.kind == "gaussian":
        return _sample_gaussian(grf, grid, rng)
    raise ValueError(f"Unknown initial condition kind: {grf.kind!r}")


def _sample_gaussian(grf: GrfSpec, grid: Grid, rng: np.random.Generator) -> np.ndarray:
    k = wavenumbers(grid)
    k_sq = k**2 if isinstance(grid, Grid1D) else k[0] ** 2 + k[1] ** 2
    density = (k_sq + grf.tau**2) ** (-grf.decay / 2.0)
    xi = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    coeffs = grf.amplitude * density * xi
    coeffs.flat[0] = 0.0
    field = (np.fft.ifftn(coeffs) * grid.size).real
    return field - field.mean()


def _sample_sine(grf: GrfSpec, grid: Grid, rng: np.random.Generator) -> np.ndarray:
    if not isinstance(grid, Grid1D):
        raise GridError("sine initial conditions are defined on 1D grids only")
    if grf.n_modes < 1 or grf.n_modes > grid.n // 2 - 1:
        raise GridError(f"n_modes must be in [1, {grid.n // 2 - 1}], got {grf.n_modes}")
    x = np.arange(grid.n) * grid.dx
    a = rng.standard_normal(grf.n_modes)
    b = rng.standard_normal(grf.n_modes)
    field = np.zeros(grid.n)
    for j in range(1, grf.n_modes + 1):
        phase = 2.0 * np.pi * j * x / grid.length
        field += a[j - 1] * np.cos(phase) + b[j - 1] * np.sin(phase)
    field -= field.mean()
    return grf.amplitude * field / np.max(np.abs(field))
