"""
Model File — named f64 blobs, little-endian.

    magic "NODM" | u8 version | u32 blob count
    per blob: u16 name length | name (utf-8) | u32 rank | u32 dims… | f64 payload

Blob names:
  meta.*            rank-0 architecture fields (ModelConfig)
  predictor.* …     parameters, dotted paths
  adam.m.<name>     first moments      } present only when the optimizer
  adam.v.<name>     second moments     } state was saved
  adam.step         rank-0 step count  }

Round trips are bit-exact.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from noda.config import settings
from noda.dataset import Equation
from noda.errors import FormatError
from noda.neural_operator import NodaParams
from noda.schemas.config import ModelConfig
from noda.training import AdamState

MAGIC = b"NODM"
_PREAMBLE = struct.Struct("<4sBI")
_F64 = np.dtype("<f8")

_MEASUREMENT_CODES = {"identity": 0.0, "random": 1.0}
_INT_META = ("ndim", "n", "width", "modes", "n_blocks", "hidden", "measurement_seed", "p")
_BOOL_META = ("use_coords", "learnable_cstar")


# ============================================================
# BLOB CONTAINER
# ============================================================

def encode_blobs(blobs: Mapping[str, np.ndarray]) -> bytes:
    parts = [_PREAMBLE.pack(MAGIC, settings.MODEL_FORMAT_VERSION, len(blobs))]
    for name, array in blobs.items():
        array = np.asarray(array, dtype=np.float64)
        raw_name = name.encode("utf-8")
        if len(raw_name) > 0xFFFF:
            raise ValueError(f"blob name too long: {name[:40]}…")
        parts.append(struct.pack("<H", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack(f"<I{array.ndim}I", array.ndim, *array.shape))
        parts.append(np.ascontiguousarray(array, dtype=_F64).tobytes())
    return b"".join(parts)


def decode_blobs(raw: bytes, path: str | None = None) -> dict[str, np.ndarray]:
    if len(raw) < _PREAMBLE.size:
        raise FormatError("truncated model header", len(raw), path)
    magic, version, count = _PREAMBLE.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0, path)
    if version != settings.MODEL_FORMAT_VERSION:
        raise FormatError(f"unsupported model version {version}", 4, path)

    def take(fmt: str, offset: int) -> tuple:
        size = struct.calcsize(fmt)
        if offset + size > len(raw):
            raise FormatError("truncated blob", offset, path)
        return struct.unpack_from(fmt, raw, offset)

    blobs: dict[str, np.ndarray] = {}
    offset = _PREAMBLE.size
    for _ in range(count):
        (name_len,) = take("<H", offset)
        offset += 2
        if offset + name_len > len(raw):
            raise FormatError("truncated blob name", offset, path)
        try:
            name = raw[offset:offset + name_len].decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("blob name is not utf-8", offset, path) from None
        offset += name_len
        (rank,) = take("<I", offset)
        offset += 4
        dims = take(f"<{rank}I", offset)
        offset += 4 * rank
        count_values = int(np.prod(dims, dtype=np.int64)) if rank else 1
        end = offset + 8 * count_values
        if end > len(raw):
            raise FormatError(f"truncated payload for {name!r}", offset, path)
        values = np.frombuffer(raw, dtype=_F64, count=count_values, offset=offset)
        blobs[name] = values.astype(np.float64).reshape(dims)
        offset = end
    if offset != len(raw):
        raise FormatError(f"{len(raw) - offset} trailing bytes", offset, path)
    return blobs


def write_blobs(path: str | Path, blobs: Mapping[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_bytes(encode_blobs(blobs))
    os.replace(tmp, path)


def read_blobs(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    return decode_blobs(path.read_bytes(), str(path))


# ============================================================
# MODEL + OPTIMIZER STATE
# ============================================================

def config_to_meta(config: ModelConfig) -> dict[str, np.ndarray]:
    meta = {
        "meta.equation": float(Equation.parse(config.equation)),
        "meta.length": config.length,
        "meta.measurement": _MEASUREMENT_CODES[config.measurement],
    }
    for key in _INT_META + _BOOL_META:
        meta[f"meta.{key}"] = float(getattr(config, key))
    return {k: np.array(v, dtype=np.float64) for k, v in meta.items()}


def config_from_meta(blobs: Mapping[str, np.ndarray], path: str | None = None) -> ModelConfig:
    try:
        data = {
            "equation": Equation(int(blobs["meta.equation"])).label,
            "length": float(blobs["meta.length"]),
            "measurement": {v: k for k, v in _MEASUREMENT_CODES.items()}[float(blobs["meta.measurement"])],
        }
        for key in _INT_META:
            data[key] = int(blobs[f"meta.{key}"])
        for key in _BOOL_META:
            data[key] = bool(blobs[f"meta.{key}"])
        return ModelConfig(**data)
    except (KeyError, ValueError) as exc:
        raise FormatError(f"invalid model metadata: {exc}", 0, path) from exc


@dataclass
class Checkpoint:
    params: NodaParams
    adam: AdamState | None = None


def save_checkpoint(path: str | Path, params: NodaParams, adam: AdamState | None = None) -> None:
    blobs = config_to_meta(params.config)
    blobs.update(params.arrays)
    if adam is not None:
        blobs.update({f"adam.m.{k}": v for k, v in adam.m.items()})
        blobs.update({f"adam.v.{k}": v for k, v in adam.v.items()})
        blobs["adam.step"] = np.array(float(adam.step))
    write_blobs(path, blobs)


def load_checkpoint(path: str | Path) -> Checkpoint:
    blobs = read_blobs(path)
    config = config_from_meta(blobs, str(path))
    arrays = {k: v for k, v in blobs.items() if not k.startswith(("meta.", "adam."))}
    params = NodaParams(config, arrays)

    adam = None
    if "adam.step" in blobs:
        m = {k[len("adam.m."):]: b for k, b in blobs.items() if k.startswith("adam.m.")}
        v = {k[len("adam.v."):]: b for k, b in blobs.items() if k.startswith("adam.v.")}
        if set(m) != set(arrays) or set(v) != set(arrays):
            raise FormatError("optimizer state does not cover the model parameters", 0, str(path))
        adam = AdamState(m=m, v=v, step=int(blobs["adam.step"]))
    return Checkpoint(params=params, adam=adam)


def load_model(path: str | Path) -> NodaParams:
    return load_checkpoint(path).params
