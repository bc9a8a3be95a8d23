"""
NODA Configuration

Central settings loaded from environment variables.
"""

import os
from dataclasses import dataclass
from dotenv import load_dotenv

load_dotenv()

APP_VERSION = "0.1.0"


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "on")


@dataclass(frozen=True)
class Settings:
    """Immutable application settings."""

    # --- Versioning ---
    MODEL_FORMAT_VERSION: int = 1
    TRAJECTORY_FORMAT_VERSION: int = 1

    # --- Data ---
    DATA_DIR: str = os.getenv("NODA_DATA_DIR", "data")
    DEFAULT_SEED: int = int(os.getenv("NODA_DEFAULT_SEED", "0"))

    # --- Run Ledger ---
    LEDGER_PATH: str = os.getenv("NODA_LEDGER_PATH", "noda_runs.db")
    LEDGER_ENABLED: bool = _env_bool("NODA_LEDGER_ENABLED", "true")

    # --- Parallelism ---
    WORKERS: int = max(1, int(os.getenv("NODA_WORKERS", str(os.cpu_count() or 1))))

    # --- Benchmarking ---
    BENCH_ITERATIONS: int = int(os.getenv("NODA_BENCH_ITERATIONS", "1000"))
    BENCH_WARMUP: int = int(os.getenv("NODA_BENCH_WARMUP", "50"))


settings = Settings()
