"""
Metrics — RelMSE and the reference estimators it is compared against.

  RelMSE = Σ_{k=a}^{b} ‖z_D(t_k) − ẑ(t_k)‖² / Σ_{k=a}^{b} ‖z_D(t_k)‖²

averaged over trajectories by the caller (mean ± population std).
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from noda.dataset import Trajectory


def _frames(x: Trajectory | np.ndarray) -> np.ndarray:
    return x.frames if isinstance(x, Trajectory) else np.asarray(x, dtype=np.float64)


def relmse(
    estimate: Trajectory | np.ndarray,
    truth: Trajectory | np.ndarray,
    t_h_frame: int,
    t_f_frame: int,
    exclude: Iterable[int] = (),
) -> float:
    """Summed squared error over frames [t_h_frame, t_f_frame] relative to the summed truth energy.

    Frames listed in `exclude` are left out of both sums.
    """
    est, ref = _frames(estimate), _frames(truth)
    if est.shape[1:] != ref.shape[1:]:
        raise ValueError(f"estimate frames {est.shape[1:]} do not match truth frames {ref.shape[1:]}")
    if not 0 <= t_h_frame <= t_f_frame or t_f_frame >= min(len(est), len(ref)):
        raise ValueError(
            f"frame window [{t_h_frame}, {t_f_frame}] outside aligned range of {min(len(est), len(ref))} frames"
        )
    skip = set(int(k) for k in exclude)
    frames = [k for k in range(t_h_frame, t_f_frame + 1) if k not in skip]
    if not frames:
        raise ValueError("no frames left to score")
    diff = est[frames] - ref[frames]
    denom = float(np.sum(ref[frames] ** 2))
    if denom == 0.0:
        raise ValueError("RelMSE undefined: truth is zero over the scored window")
    return float(np.sum(diff**2)) / denom


def aggregate(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("nothing to aggregate")
    return float(arr.mean()), float(arr.std())


def persistence_estimate(truth: Trajectory, t_h_frame: int, t_f_frame: int) -> np.ndarray:
    """ẑ_k = ẑ_{k−1}: exact up to t_H, then frozen at z_D(t_H)."""
    frames = np.empty((t_f_frame + 1, *truth.grid.shape))
    frames[: t_h_frame + 1] = truth.frames[: t_h_frame + 1]
    frames[t_h_frame + 1:] = truth.frames[t_h_frame]
    return frames


def abs_error_frames(estimate: Trajectory | np.ndarray, truth: Trajectory | np.ndarray) -> np.ndarray:
    """|ẑ − z_D| per frame over the aligned prefix."""
    est, ref = _frames(estimate), _frames(truth)
    n = min(len(est), len(ref))
    return np.abs(est[:n] - ref[:n])
