"""
Experiment Schemas — protocol specs and result rows.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

Protocol = Literal["prediction", "assimilation", "warmup"]


class ExperimentSpec(BaseModel):
    """One evaluation campaign over a held-out trajectory set."""
    model_config = ConfigDict(extra="forbid")

    equation: Literal["ks", "kdv", "ns"]
    model: str = Field(..., description="Model file to evaluate.")
    data: str = Field(..., description="Directory of test trajectories.")
    t_f: list[float] = Field(..., min_length=1, description="Horizons in seconds.")
    snr_db: list[float] = Field(..., min_length=1)
    alpha: list[float] = Field(..., min_length=1)
    t_h: float = Field(..., ge=0, description="Warm-up end in seconds.")
    t_h_sweep: list[float] = Field(default_factory=list, description="Warm-up ends (s) for the warmup protocol.")
    seeds: list[int] = Field(..., min_length=1)
    out: Optional[str] = None
    protocols: list[Protocol] = Field(
        default_factory=lambda: ["prediction", "assimilation", "warmup"], min_length=1,
    )
    measurement: Literal["identity", "random"] = "identity"
    measurement_seed: int = 0
    n_test: Optional[int] = Field(None, ge=1)
    exclude_observed: bool = False
    baselines: bool = True

    @field_validator("t_f", "alpha", "t_h_sweep", "seeds", mode="before")
    @classmethod
    def _listify(cls, v):
        return v if isinstance(v, (list, tuple)) else [v]

    @field_validator("snr_db", mode="before")
    @classmethod
    def _parse_inf(cls, v):
        v = v if isinstance(v, (list, tuple)) else [v]
        return [float(x) if isinstance(x, str) else x for x in v]

    @field_validator("alpha")
    @classmethod
    def _alpha_range(cls, v: list[float]) -> list[float]:
        for a in v:
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"alpha values must lie in [0, 1], got {a}")
        return v


class MetricRow(BaseModel):
    """One line of an experiment table."""
    method: str
    equation: str
    t_f: float
    snr_db: float
    alpha: float
    t_h: float
    relmse_mean: float = Field(..., ge=0)
    relmse_std: float = Field(..., ge=0)
    time_per_step: Optional[float] = None

    @classmethod
    def headers(cls) -> list[str]:
        return list(cls.model_fields)

    def as_csv_row(self) -> list[str]:
        out = []
        for name in self.headers():
            v = getattr(self, name)
            if v is None:
                out.append("")
            elif isinstance(v, float) and math.isinf(v):
                out.append("inf")
            else:
                out.append(repr(v) if isinstance(v, float) else str(v))
        return out


def load_experiment_spec(path: str | Path) -> ExperimentSpec:
    return ExperimentSpec.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))
