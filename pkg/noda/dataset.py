"""
Dataset — trajectories, measurements, noise and schedules.

In-memory types are immutable after construction (frames arrays are
flagged read-only). Everything random takes an explicit seed so that
generation, noise and schedules are reproducible independently.

Measurement model (noiseless part):  y = C z   with C either the
identity or a dense p×d matrix with entries drawn from U[0, 1].
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Literal, Sequence, TypeVar

import numpy as np

from noda.errors import MissingObservationError, ShapeError, ZeroSignalError
from noda.grid_fft import Grid


# ============================================================
# EQUATIONS
# ============================================================

class Equation(enum.IntEnum):
    """Equation identifiers; values are the trajectory file codes."""
    KS = 1
    KDV = 2
    NS = 3

    @classmethod
    def parse(cls, name: "str | int | Equation") -> "Equation":
        if isinstance(name, Equation):
            return name
        if isinstance(name, (int, np.integer)):
            return cls(int(name))
        key = str(name).strip().lower()
        for member in cls:
            if member.label == key:
                return member
        raise ValueError(f"Unknown equation: {name!r} (expected ks, kdv or ns)")

    @property
    def label(self) -> str:
        return self.name.lower()


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


# ============================================================
# TRAJECTORY
# ============================================================

@dataclass(frozen=True)
class Trajectory:
    """A discretized PDE solution: frames[k] = z_D(k·h)."""
    equation: Equation
    grid: Grid
    h: float
    frames: np.ndarray
    seed: int = 0

    def __post_init__(self):
        frames = _frozen(self.frames)
        if frames.ndim != 1 + self.grid.ndim or frames.shape[1:] != self.grid.shape:
            raise ShapeError("frames must be (T, *grid.shape)", frames.shape, (None, *self.grid.shape))
        if frames.shape[0] < 1:
            raise ShapeError("trajectory needs at least one frame", frames.shape)
        if not np.all(np.isfinite(frames)):
            raise ValueError("trajectory frames contain non-finite values")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "equation", Equation.parse(self.equation))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def t_f(self) -> float:
        return (self.n_frames - 1) * self.h

    @property
    def d(self) -> int:
        """Flattened spatial size."""
        return self.grid.size

    def frame_index(self, seconds: float) -> int:
        """Frame index of a time in seconds (must be a multiple of h)."""
        k = seconds / self.h
        k_int = int(round(k))
        if abs(k - k_int) > 1e-9 * max(1.0, abs(k)):
            raise ValueError(f"time {seconds} s is not a multiple of h={self.h}")
        return k_int

    def truncate(self, n_frames: int) -> "Trajectory":
        if not 1 <= n_frames <= self.n_frames:
            raise ValueError(f"cannot truncate {self.n_frames} frames to {n_frames}")
        return Trajectory(self.equation, self.grid, self.h, self.frames[:n_frames], self.seed)

    def with_frames(self, frames: np.ndarray) -> "Trajectory":
        return Trajectory(self.equation, self.grid, self.h, frames, self.seed)


# ============================================================
# MEASUREMENT OPERATOR
# ============================================================

@dataclass(frozen=True)
class MeasurementOperator:
    """y = C z on flattened fields; identity keeps C implicit."""
    kind: Literal["identity", "dense_random"]
    d: int
    p: int
    matrix: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind == "identity":
            if self.p != self.d or self.matrix is not None:
                raise ShapeError("identity operator requires p == d and no matrix", (self.p,), (self.d,))
        elif self.kind == "dense_random":
            if self.matrix is None or self.matrix.shape != (self.p, self.d):
                shape = None if self.matrix is None else self.matrix.shape
                raise ShapeError("dense_random operator matrix must be (p, d)", shape, (self.p, self.d))
            object.__setattr__(self, "matrix", _frozen(self.matrix))
        else:
            raise ValueError(f"Unknown measurement operator kind: {self.kind!r}")

    @classmethod
    def identity(cls, d: int) -> "MeasurementOperator":
        return cls(kind="identity", d=int(d), p=int(d))

    @classmethod
    def dense_random(cls, p: int, d: int, seed: int = 0) -> "MeasurementOperator":
        rng = np.random.default_rng(seed)
        return cls(kind="dense_random", d=int(d), p=int(p),
                   matrix=rng.uniform(0.0, 1.0, size=(p, d)), seed=int(seed))

    @classmethod
    def from_name(cls, name: str, d: int, seed: int = 0, p: int | None = None) -> "MeasurementOperator":
        """CLI names: 'identity' or 'random' (p defaults to d)."""
        if name == "identity":
            return cls.identity(d)
        if name in ("random", "dense_random"):
            return cls.dense_random(p or d, d, seed)
        raise ValueError(f"Unknown measurement operator: {name!r} (expected identity or random)")

    def adjoint(self) -> np.ndarray | None:
        """Ĉ* = Cᵀ as a (p, d) row-action matrix (u @ C), or None for identity."""
        return None if self.kind == "identity" else self.matrix

    def apply(self, frames: np.ndarray) -> np.ndarray:
        """Batched measurement: (..., *spatial) -> (..., p), trailing dims flattened to d."""
        frames = np.asarray(frames, dtype=np.float64)
        if frames.size == 0 or frames.size % self.d:
            raise ShapeError("frame size does not match operator dimension d", frames.shape, (self.d,))
        lead = frames.shape[: frames.ndim - _spatial_rank(frames.shape, self.d)]
        flat = frames.reshape(-1, self.d)
        out = flat.copy() if self.kind == "identity" else flat @ self.matrix.T
        return out.reshape(*lead, self.p)


def _spatial_rank(shape: tuple[int, ...], d: int) -> int:
    size = 1
    for rank, n in enumerate(reversed(shape), start=1):
        size *= n
        if size == d:
            return rank
    raise ShapeError("trailing dimensions do not flatten to d", shape, (d,))


def apply_measurement(op: MeasurementOperator, frame: np.ndarray) -> np.ndarray:
    """Noiseless measurement of a single frame -> p-vector."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.size != op.d:
        raise ShapeError("frame dimension does not match operator", frame.shape, (op.d,))
    flat = frame.reshape(op.d)
    if op.kind == "identity":
        return flat.copy()
    return op.matrix @ flat


# ============================================================
# NOISE
# ============================================================

def add_noise_snr(y_clean: np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    """Add white Gaussian noise at `snr_db` relative to the set's mean power.

    σ² = mean(y²) over every element of the observation set / 10^(snr/10).
    snr_db = +inf returns an unchanged copy.
    """
    y_clean = np.asarray(y_clean, dtype=np.float64)
    if np.isposinf(snr_db):
        return y_clean.copy()
    if np.isnan(snr_db):
        raise ValueError("snr_db must be a real number or +inf")
    power = float(np.mean(y_clean**2)) if y_clean.size else 0.0
    if power == 0.0:
        raise ZeroSignalError("cannot add noise at finite SNR to a zero-power signal")
    sigma = np.sqrt(power / 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    return y_clean + rng.normal(0.0, sigma, size=y_clean.shape)


# ============================================================
# OBSERVATIONS
# ============================================================

@dataclass(frozen=True)
class ObservationSet:
    """Noisy measurements y(t_k) at frame indices `times`."""
    times: tuple[int, ...]
    y: np.ndarray
    snr_db: float
    op: MeasurementOperator
    seed: int = 0

    def __post_init__(self):
        times = tuple(int(t) for t in self.times)
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("observation times must be strictly increasing")
        if times and times[0] < 0:
            raise ValueError("observation times must be non-negative")
        y = _frozen(self.y).reshape(len(times), self.op.p)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(times)})

    def __contains__(self, frame: int) -> bool:
        return frame in self._index

    def at(self, frame: int) -> np.ndarray:
        try:
            return self.y[self._index[frame]]
        except KeyError:
            raise MissingObservationError(f"no observation at frame {frame}") from None


def observe(
    trajectory: Trajectory,
    op: MeasurementOperator,
    times: Sequence[int],
    snr_db: float,
    seed: int,
) -> ObservationSet:
    """Measure `trajectory` at `times` and add SNR-calibrated noise."""
    times = sorted({int(t) for t in times})
    if times and (times[0] < 0 or times[-1] >= trajectory.n_frames):
        raise ValueError(
            f"observation times must lie in [0, {trajectory.n_frames - 1}], got {times[0]}..{times[-1]}"
        )
    clean = op.apply(trajectory.frames[times]) if times else np.zeros((0, op.p))
    noisy = add_noise_snr(clean, snr_db, seed) if times else clean
    return ObservationSet(times=tuple(times), y=noisy, snr_db=float(snr_db), op=op, seed=seed)


# ============================================================
# SCHEDULES
# ============================================================

@dataclass(frozen=True)
class Schedule:
    """Warm-up frames [1, t_h] plus sampled assimilation frames in (t_h, t_f]."""
    t_h: int
    t_f: int
    alpha: float
    assim_times: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.t_h < self.t_f:
            raise ValueError(f"need 0 <= t_h < t_f, got t_h={self.t_h}, t_f={self.t_f}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        times = tuple(sorted(int(t) for t in self.assim_times))
        if times and (times[0] <= self.t_h or times[-1] > self.t_f):
            raise ValueError("assimilation times must lie in (t_h, t_f]")
        object.__setattr__(self, "assim_times", times)
        object.__setattr__(self, "_assim_set", frozenset(times))

    @property
    def horizon(self) -> int:
        return self.t_f - self.t_h

    @property
    def warmup_frames(self) -> range:
        return range(1, self.t_h + 1)

    def observed_frames(self) -> tuple[int, ...]:
        return tuple(self.warmup_frames) + self.assim_times

    def is_corrected(self, frame: int) -> bool:
        return 1 <= frame <= self.t_h or frame in self._assim_set


def assimilation_count(alpha: float, horizon: int) -> int:
    """round(α · horizon), half-up."""
    return int(np.floor(alpha * horizon + 0.5))


def sample_schedule(t_h: int, t_f_frames: int, alpha: float, seed: int) -> Schedule:
    """Draw round(α·(t_f − t_h)) assimilation frames uniformly from (t_h, t_f]."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if not t_h < t_f_frames:
        raise ValueError(f"t_h ({t_h}) must be smaller than t_f ({t_f_frames})")
    horizon = t_f_frames - t_h
    count = assimilation_count(alpha, horizon)
    rng = np.random.default_rng(seed)
    picks = rng.choice(np.arange(t_h + 1, t_f_frames + 1), size=count, replace=False)
    return Schedule(t_h=t_h, t_f=t_f_frames, alpha=float(alpha), assim_times=tuple(sorted(picks.tolist())))


# ============================================================
# SPLITS
# ============================================================

T = TypeVar("T")


def split(dataset: Sequence[T], n_train: int) -> tuple[list[T], list[T]]:
    """First n_train items train, the rest test (index order)."""
    if not 0 <= n_train <= len(dataset):
        raise ValueError(f"n_train must be in [0, {len(dataset)}], got {n_train}")
    items = list(dataset)
    return items[:n_train], items[n_train:]

