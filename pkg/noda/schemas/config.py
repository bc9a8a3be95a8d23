"""
Configuration Schemas — model architecture and training run.

TrainConfig files are JSON or plain `key=value` lines; both map onto
exactly the TrainConfig field names, and unknown keys are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


# ============================================================
# MODEL
# ============================================================

class ModelConfig(BaseModel):
    """Architecture of one NODA model; persisted with its weights."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    equation: Literal["ks", "kdv", "ns"]
    ndim: Literal[1, 2]
    n: int = Field(..., ge=8, description="Grid points per spatial axis.")
    length: float = Field(..., gt=0)
    width: int = Field(64, ge=1)
    modes: int = Field(20, ge=1)
    n_blocks: int = Field(4, ge=1)
    hidden: int = Field(256, ge=1, description="Hidden width of the measurement net E.")
    use_coords: bool = True
    measurement: Literal["identity", "random"] = "identity"
    measurement_seed: int = 0
    p: int = Field(..., ge=1, description="Measurement dimension.")
    learnable_cstar: bool = False

    @model_validator(mode="after")
    def _check_dims(self) -> "ModelConfig":
        if 2 * self.modes > self.n:
            raise ValueError(f"modes={self.modes} needs at least {2 * self.modes} grid points, got n={self.n}")
        if self.measurement == "identity" and self.p != self.d:
            raise ValueError(f"identity measurement needs p == d ({self.d}), got p={self.p}")
        return self

    @property
    def d(self) -> int:
        return self.n ** self.ndim

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return (self.n,) * self.ndim

    @property
    def in_channels(self) -> int:
        return 1 + (self.ndim if self.use_coords else 0)


# ============================================================
# TRAINING
# ============================================================

class TrainConfig(BaseModel):
    """Training run settings; defaults are the reference schedule."""
    model_config = ConfigDict(extra="forbid")

    lr: float = Field(1e-4, gt=0)
    lr_decay: float = Field(0.5, gt=0, le=1)
    lr_decay_every: int = Field(50, ge=1)
    epochs: int = Field(300, ge=1)
    batch_size: int = Field(32, ge=1)
    lam: float = Field(0.5, ge=0)
    t_h_train: int = Field(500, ge=0, description="Warm-up frames supplied during training.")
    bptt_window: int = Field(10, ge=1)
    seed: int = 0
    segment_frames: Optional[int] = Field(None, ge=2)
    snr_db: float = 30.0
    grad_clip: Optional[float] = Field(1.0, gt=0)
    width: int = Field(64, ge=1)
    modes: int = Field(20, ge=1)
    hidden: int = Field(256, ge=1)
    use_coords: bool = True
    measurement: Literal["identity", "random"] = "identity"
    measurement_seed: int = 0
    measurement_p: Optional[int] = Field(None, ge=1, description="p for the random operator; None = d.")
    learnable_cstar: bool = False
    n_train: Optional[int] = Field(None, ge=1)


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.lower() in ("none", "null", ""):
        return None
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_key_value(text: str) -> dict:
    """Parse `key = value` lines; `#` starts a comment."""
    data = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        data[key.strip()] = _parse_value(value)
    return data


def load_train_config(path: str | Path) -> TrainConfig:
    """Load a JSON or key=value training config (pydantic ValidationError on bad keys)."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    data = json.loads(text) if stripped.startswith("{") else parse_key_value(text)
    return TrainConfig.model_validate(data)
