"""
Trajectory Container — little-endian binary format.

Header (52 bytes):

    offset  type   field
    0       4s     magic "NODA"
    4       u8     version (1)
    5       u8     equation (1=KS, 2=KdV, 3=NS)
    6       u8     ndims (1 or 2)
    7       u8     dtype (0 = f64)
    8       u32    nx
    12      u32    ny (1 for 1D)
    16      u32    n_frames
    20      f64    h
    28      f64    length_x
    36      f64    length_y (0 for 1D)
    44      u64    seed

followed by n_frames × nx × ny f64 values, row-major.

Observation sets reuse the container: ndims=1, nx=p, ny=1,
n_frames=|times|, length_x=snr_db, seed=noise seed, then the values,
then a trailing table of |times| u32 frame indices.

Writers go through a temp file + os.replace so readers never see a
partial file.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from noda.config import settings
from noda.dataset import Equation, MeasurementOperator, ObservationSet, Trajectory
from noda.errors import FormatError
from noda.grid_fft import Grid1D, Grid2D

MAGIC = b"NODA"
HEADER = struct.Struct("<4sBBBBIIIdddQ")
HEADER_SIZE = HEADER.size  # 52
DTYPE_F64 = 0
_F64 = np.dtype("<f8")
_U32 = np.dtype("<u4")

TRAJECTORY_SUFFIX = ".noda"
MANIFEST_NAME = "manifest.json"


def _atomic_write(path: Path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


# ============================================================
# TRAJECTORIES
# ============================================================

def encode_trajectory(traj: Trajectory) -> bytes:
    grid = traj.grid
    if isinstance(grid, Grid1D):
        ndims, nx, ny, lx, ly = 1, grid.n, 1, grid.length, 0.0
    else:
        ndims, nx, ny, lx, ly = 2, grid.nx, grid.ny, grid.length, grid.length
    header = HEADER.pack(
        MAGIC, settings.TRAJECTORY_FORMAT_VERSION, int(traj.equation), ndims, DTYPE_F64,
        nx, ny, traj.n_frames, traj.h, lx, ly, traj.seed,
    )
    return header + np.ascontiguousarray(traj.frames, dtype=_F64).tobytes()


def write_trajectory(path: str | Path, traj: Trajectory) -> None:
    """Write a trajectory; the round trip through read_trajectory is bit-exact."""
    _atomic_write(Path(path), encode_trajectory(traj))


def _parse_header(raw: bytes, path: str | None) -> tuple:
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"truncated header ({len(raw)} of {HEADER_SIZE} bytes)", len(raw), path)
    fields = HEADER.unpack_from(raw, 0)
    magic, version, equation, ndims, dtype = fields[:5]
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0, path)
    if version != settings.TRAJECTORY_FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", 4, path)
    if equation not in (1, 2, 3):
        raise FormatError(f"unknown equation code {equation}", 5, path)
    if ndims not in (1, 2):
        raise FormatError(f"unsupported ndims {ndims}", 6, path)
    if dtype != DTYPE_F64:
        raise FormatError(f"unsupported dtype code {dtype}", 7, path)
    return fields


def decode_trajectory(raw: bytes, path: str | None = None) -> Trajectory:
    _, _, equation, ndims, _, nx, ny, n_frames, h, lx, ly, seed = _parse_header(raw, path)
    count = n_frames * nx * ny
    expected = HEADER_SIZE + 8 * count
    if len(raw) < expected:
        raise FormatError(f"truncated frame data ({len(raw)} of {expected} bytes)", len(raw), path)
    if len(raw) > expected:
        raise FormatError(f"{len(raw) - expected} trailing bytes", expected, path)

    values = np.frombuffer(raw, dtype=_F64, count=count, offset=HEADER_SIZE).astype(np.float64)
    try:
        if ndims == 1:
            grid = Grid1D(nx, lx)
            frames = values.reshape(n_frames, nx)
        else:
            grid = Grid2D(nx, ny, lx)
            frames = values.reshape(n_frames, nx, ny)
        return Trajectory(equation=Equation(equation), grid=grid, h=h, frames=frames, seed=seed)
    except ValueError as exc:
        raise FormatError(f"invalid trajectory contents: {exc}", HEADER_SIZE, path) from exc


def read_trajectory(path: str | Path) -> Trajectory:
    path = Path(path)
    return decode_trajectory(path.read_bytes(), str(path))


def trajectory_file_size(n_frames: int, spatial_size: int) -> int:
    return HEADER_SIZE + 8 * n_frames * spatial_size


# ============================================================
# OBSERVATION SETS
# ============================================================

def write_observations(path: str | Path, obs: ObservationSet, equation: Equation, h: float) -> None:
    """Observation values plus the trailing u32 frame-index table."""
    header = HEADER.pack(
        MAGIC, settings.TRAJECTORY_FORMAT_VERSION, int(equation), 1, DTYPE_F64,
        obs.op.p, 1, len(obs.times), h, obs.snr_db, 0.0, obs.seed,
    )
    payload = (
        header
        + np.ascontiguousarray(obs.y, dtype=_F64).tobytes()
        + np.asarray(obs.times, dtype=_U32).tobytes()
    )
    _atomic_write(Path(path), payload)


def read_observations(path: str | Path, op: MeasurementOperator) -> ObservationSet:
    """Read an observation set; `op` must match the recorded dimension p."""
    path = Path(path)
    raw = path.read_bytes()
    _, _, _, _, _, p, _, n_obs, _, snr_db, _, seed = _parse_header(raw, str(path))
    if p != op.p:
        raise FormatError(f"observation dimension {p} does not match operator p={op.p}", 8, str(path))
    values_end = HEADER_SIZE + 8 * n_obs * p
    expected = values_end + 4 * n_obs
    if len(raw) != expected:
        raise FormatError(f"observation file size {len(raw)} != {expected}", min(len(raw), expected), str(path))
    y = np.frombuffer(raw, dtype=_F64, count=n_obs * p, offset=HEADER_SIZE).astype(np.float64)
    times = np.frombuffer(raw, dtype=_U32, count=n_obs, offset=values_end)
    return ObservationSet(times=tuple(int(t) for t in times), y=y.reshape(n_obs, p),
                          snr_db=snr_db, op=op, seed=seed)


# ============================================================
# DATASET DIRECTORIES
# ============================================================

def trajectory_path(directory: str | Path, index: int) -> Path:
    return Path(directory) / f"traj_{index:05d}{TRAJECTORY_SUFFIX}"


def save_dataset(directory: str | Path, trajectories: list[Trajectory], metadata: dict | None = None) -> Path:
    """Write trajectories in index order plus a JSON manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, traj in enumerate(trajectories):
        write_trajectory(trajectory_path(directory, i), traj)
    manifest = {
        "n_trajectories": len(trajectories),
        "equation": trajectories[0].equation.label if trajectories else None,
        "seeds": [t.seed for t in trajectories],
        **(metadata or {}),
    }
    manifest_path = directory / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return manifest_path


def load_dataset(directory: str | Path) -> list[Trajectory]:
    """Read every trajectory file of a dataset directory in index order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    files = sorted(directory.glob(f"traj_*{TRAJECTORY_SUFFIX}"))
    return [read_trajectory(f) for f in files]
