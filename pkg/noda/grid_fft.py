"""
Grids and Spectral Transforms

Periodic power-of-two grids shared by the solvers and the neural
operator, plus the one transform convention used everywhere:

  forward  = unnormalized sum        c(k) = Σ_j v_j exp(-i k x_j)
  inverse  = divides by point count  v_j  = (1/n) Σ_k c(k) exp(+i k x_j)

Wavenumbers follow the transform layout
  k_j = 2π·j/L,  j ∈ {0, 1, …, n/2, −n/2+1, …, −1}
with the Nyquist index reported as +n/2.

All functions are pure and operate on float64 / complex128 arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from noda.errors import GridError


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


# ============================================================
# GRIDS
# ============================================================

@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [0, length)."""
    n: int
    length: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or not _is_power_of_two(int(self.n)):
            raise GridError(f"Grid1D.n must be a power of two, got {self.n}")
        if self.n < 8:
            raise GridError(f"Grid1D.n must be >= 8, got {self.n}")
        if not self.length > 0:
            raise GridError(f"Grid1D.length must be positive, got {self.length}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "length", float(self.length))

    @property
    def dx(self) -> float:
        # n is a power of two, so length/n*n is exact in binary floating point
        return self.length / self.n

    @property
    def shape(self) -> tuple[int]:
        return (self.n,)

    @property
    def ndim(self) -> int:
        return 1

    @property
    def size(self) -> int:
        return self.n


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic grid on the torus [0, length)²."""
    nx: int
    ny: int
    length: float = 1.0

    def __post_init__(self):
        for name in ("nx", "ny"):
            val = getattr(self, name)
            if not isinstance(val, (int, np.integer)) or not _is_power_of_two(int(val)):
                raise GridError(f"Grid2D.{name} must be a power of two, got {val}")
            if val < 8:
                raise GridError(f"Grid2D.{name} must be >= 8, got {val}")
            object.__setattr__(self, name, int(val))
        if not self.length > 0:
            raise GridError(f"Grid2D.length must be positive, got {self.length}")
        object.__setattr__(self, "length", float(self.length))

    @property
    def dx(self) -> float:
        return self.length / self.nx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def ndim(self) -> int:
        return 2

    @property
    def size(self) -> int:
        return self.nx * self.ny


Grid = Union[Grid1D, Grid2D]


@dataclass(frozen=True)
class SpectralField:
    """Complex Fourier coefficients (full fftn layout) of a field on `shape`."""
    coeffs: np.ndarray
    shape: tuple[int, ...]

    def is_conjugate_symmetric(self, rtol: float = 1e-12) -> bool:
        """True when c(−k) == conj(c(k)) within `rtol` of the largest coefficient."""
        flipped = self.coeffs
        for axis in range(len(self.shape)):
            flipped = np.roll(np.flip(flipped, axis=axis), 1, axis=axis)
        scale = max(float(np.max(np.abs(self.coeffs))), 1e-300)
        return bool(np.max(np.abs(flipped - np.conj(self.coeffs))) <= rtol * scale)


# ============================================================
# WAVENUMBERS
# ============================================================

def _axis_wavenumbers(n: int, length: float) -> np.ndarray:
    j = np.fft.fftfreq(n, d=1.0 / n)
    j[n // 2] = n // 2
    return 2.0 * np.pi * j / length


def wavenumbers(grid: Grid) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    """Wavenumbers in transform layout.

    Grid1D -> vector of length n.
    Grid2D -> (kx, ky) arrays of shape (nx, ny), 'ij' indexing.
    """
    if isinstance(grid, Grid1D):
        return _axis_wavenumbers(grid.n, grid.length)
    kx = _axis_wavenumbers(grid.nx, grid.length)
    ky = _axis_wavenumbers(grid.ny, grid.length)
    return np.meshgrid(kx, ky, indexing="ij")


def rfft_wavenumbers(n: int, length: float) -> np.ndarray:
    """Non-negative wavenumbers 0..n/2 matching the rfft half-spectrum layout."""
    return 2.0 * np.pi * np.arange(n // 2 + 1) / length


def coordinates(grid: "Grid | tuple[int, ...]") -> np.ndarray:
    """Normalized coordinates x/L in [0, 1), shape (*spatial, ndim).

    Accepts a grid or a bare spatial shape (the lift layer passes the
    field shape).
    """
    spatial = grid.shape if isinstance(grid, (Grid1D, Grid2D)) else tuple(int(n) for n in grid)
    mesh = np.meshgrid(*(np.arange(n) / n for n in spatial), indexing="ij")
    return np.stack(mesh, axis=-1)


def dealias_mask(n: int) -> np.ndarray:
    """2/3-rule mask over the full fft layout of one axis (True = keep)."""
    j = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    return j < n / 3.0


def rdealias_mask(n: int) -> np.ndarray:
    """2/3-rule mask over the rfft half-spectrum of one axis."""
    return np.arange(n // 2 + 1) < n / 3.0


# ============================================================
# TRANSFORMS
# ============================================================

def _check_lengths(shape: tuple[int, ...]) -> None:
    for n in shape:
        if not _is_power_of_two(int(n)):
            raise GridError(f"transform length must be a power of two, got shape {shape}")


def dft_forward(field: np.ndarray) -> SpectralField:
    """Unnormalized forward DFT over every axis of a real field."""
    field = np.asarray(field, dtype=np.float64)
    _check_lengths(field.shape)
    return SpectralField(coeffs=np.fft.fftn(field), shape=field.shape)


def dft_inverse(spec: SpectralField) -> np.ndarray:
    """Inverse DFT (divides by point count); returns the real part."""
    _check_lengths(spec.shape)
    return np.fft.ifftn(spec.coeffs, s=spec.shape).real


def spectral_derivative(
    field: np.ndarray,
    grid: Grid,
    order: int,
    axis: int = 0,
) -> np.ndarray:
    """F⁻¹((ik)^order · F(v)) along `axis`; Nyquist zeroed for odd orders."""
    if int(order) != order or order < 1:
        raise GridError(f"derivative order must be a positive integer, got {order}")
    field = np.asarray(field, dtype=np.float64)
    if field.shape != grid.shape:
        raise GridError(f"field shape {field.shape} does not match grid {grid.shape}")
    _check_lengths(field.shape)

    n = field.shape[axis]
    k = rfft_wavenumbers(n, grid.length)
    if order % 2 == 1:
        k = k.copy()
        k[-1] = 0.0
    symbol = (1j * k) ** order
    shape = [1] * field.ndim
    shape[axis] = n // 2 + 1
    spec = np.fft.rfft(field, axis=axis) * symbol.reshape(shape)
    return np.fft.irfft(spec, n=n, axis=axis)
