"""
Structured Logging — JSON or Text Output

Library modules log under the `noda.` namespace and pass run context
(epoch, loss, frame, relmse, …) through `extra=`. The JSON formatter
emits one object per line with the whitelisted context fields; the text
formatter appends the same fields as `key=value` so interactive
training runs stay readable.

Records go to stderr: stdout belongs to CLI tables and CSV output.

Usage:
    from noda.logging import get_logger
    logger = get_logger("training")
    logger.info("Epoch complete", extra={"epoch": 3, "loss": 0.41, "lr": 1e-4})
"""

from __future__ import annotations

import json
import logging
import math
import os
import sys
from datetime import datetime, timezone

import numpy as np


LOG_LEVEL = os.getenv("NODA_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = os.getenv("NODA_LOG_FORMAT", "text")  # "json" or "text"

# Context fields copied from `extra=`; anything else is dropped
CONTEXT_FIELDS = (
    "equation", "epoch", "batch", "loss", "lr", "grad_norm", "frame",
    "seed", "n_frames", "relmse", "alpha", "snr_db", "t_h", "method",
    "duration_ms", "path", "error", "error_type", "event_hash",
    "excluded", "checked", "max_rel_error",
)


def _context(record: logging.LogRecord) -> dict:
    found = {}
    for key in CONTEXT_FIELDS:
        val = getattr(record, key, None)
        if val is None:
            continue
        if isinstance(val, np.generic):
            val = val.item()
        if isinstance(val, float) and not math.isfinite(val):
            val = str(val)  # JSON has no inf/nan
        found[key] = val
    return found


class JSONFormatter(logging.Formatter):
    """One JSON object per record."""

    def format(self, record: logging.LogRecord) -> str:
        entry = {
            "timestamp": datetime.fromtimestamp(record.created, timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            **_context(record),
        }
        if record.exc_info and record.exc_info[0]:
            entry["exception"] = self.formatException(record.exc_info)
        return json.dumps(entry, default=str)


class TextFormatter(logging.Formatter):
    """`time [LEVEL] logger: message key=value …`"""

    def __init__(self):
        super().__init__(
            fmt="%(asctime)s [%(levelname)-8s] %(name)s: %(message)s",
            datefmt="%H:%M:%S",
        )

    def format(self, record: logging.LogRecord) -> str:
        line = super().format(record)
        context = _context(record)
        if not context:
            return line
        head, sep, tail = line.partition("\n")
        fields = " ".join(
            f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in context.items()
        )
        return f"{head}  {fields}{sep}{tail}"


def setup_logging(level: str | None = None, fmt: str | None = None) -> logging.Logger:
    """Install one stderr handler on the `noda` logger, replacing earlier ones."""
    root = logging.getLogger("noda")
    root.setLevel(getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO))
    root.handlers.clear()

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JSONFormatter() if (fmt or LOG_FORMAT) == "json" else TextFormatter())
    root.addHandler(handler)
    root.propagate = False
    return root


def get_logger(name: str) -> logging.Logger:
    """Named logger under the noda namespace."""
    return logging.getLogger(f"noda.{name}")
