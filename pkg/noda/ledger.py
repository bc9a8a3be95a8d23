"""
Run Ledger — hash-chained record of CLI runs.

Every generate / train / rollout / eval / experiment / gradcheck /
bench invocation appends one entry: its arguments, the SHA-256 of the
files it read and wrote, and its seeds. Each entry hashes its own
contents together with the previous entry's hash, so an edited or
deleted row shows up in verify_chain().
"""

from __future__ import annotations

import hashlib
import json
import logging
import sqlite3
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

from noda.config import APP_VERSION, settings

logger = logging.getLogger("noda.ledger")

GENESIS_HASH = "0" * 64


def file_digest(path: str | Path, chunk: int = 1 << 20) -> str | None:
    """SHA-256 of a file, or None if it does not exist."""
    path = Path(path)
    if not path.is_file():
        return None
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(chunk), b""):
            h.update(block)
    return h.hexdigest()


def _entry_hash(entry_id: int, prev_hash: str, command: str, data: str, timestamp: str, version: str) -> str:
    return hashlib.sha256(f"{entry_id}{prev_hash}{command}{data}{timestamp}{version}".encode()).hexdigest()


class RunLedger:
    """Append-only SQLite ledger of runs."""

    def __init__(self, db_path: str | Path = "noda_runs.db"):
        self.db_path = str(db_path)
        self._lock = threading.Lock()
        self._init_db()

    def _init_db(self):
        with self._get_conn() as conn:
            conn.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    prev_hash TEXT NOT NULL,
                    hash TEXT NOT NULL,
                    command TEXT NOT NULL,
                    data TEXT NOT NULL,
                    timestamp TEXT NOT NULL,
                    app_version TEXT NOT NULL
                )
            """)
            conn.execute("CREATE INDEX IF NOT EXISTS idx_command ON runs(command)")
            conn.commit()

    def _get_conn(self) -> sqlite3.Connection:
        return sqlite3.connect(self.db_path)

    def record(
        self,
        command: str,
        args: dict[str, Any],
        inputs: Optional[list[str | Path]] = None,
        outputs: Optional[list[str | Path]] = None,
        **extra: Any,
    ) -> str:
        """Append one run; returns its hash."""
        data = {
            "args": args,
            "inputs": {str(p): file_digest(p) for p in inputs or []},
            "outputs": {str(p): file_digest(p) for p in outputs or []},
            **extra,
        }
        data_str = json.dumps(data, default=str, sort_keys=True)
        with self._lock:
            with self._get_conn() as conn:
                row = conn.execute("SELECT hash FROM runs ORDER BY id DESC LIMIT 1").fetchone()
                prev_hash = row[0] if row else GENESIS_HASH
                timestamp = datetime.now(timezone.utc).isoformat()
                cursor = conn.execute(
                    "INSERT INTO runs (prev_hash, hash, command, data, timestamp, app_version) "
                    "VALUES (?, ?, ?, ?, ?, ?)",
                    (prev_hash, "pending", command, data_str, timestamp, APP_VERSION),
                )
                entry_id = cursor.lastrowid
                new_hash = _entry_hash(entry_id, prev_hash, command, data_str, timestamp, APP_VERSION)
                conn.execute("UPDATE runs SET hash = ? WHERE id = ?", (new_hash, entry_id))
                conn.commit()
        logger.debug("Recorded %s run", command, extra={"event_hash": new_hash})
        return new_hash

    def recent(self, limit: int = 20, command: Optional[str] = None) -> list[dict]:
        query = "SELECT id, prev_hash, hash, command, data, timestamp, app_version FROM runs"
        params: tuple = ()
        if command:
            query += " WHERE command = ?"
            params = (command,)
        query += " ORDER BY id DESC LIMIT ?"
        with self._get_conn() as conn:
            rows = conn.execute(query, (*params, limit)).fetchall()
        return [
            {"id": r[0], "prev_hash": r[1], "hash": r[2], "command": r[3],
             "data": json.loads(r[4]), "timestamp": r[5], "app_version": r[6]}
            for r in rows
        ]

    def verify_chain(self, limit: int = 100) -> dict:
        """Check the newest `limit` entries for hash mismatches and broken links."""
        with self._get_conn() as conn:
            rows = conn.execute(
                """SELECT id, prev_hash, hash, command, data, timestamp, app_version
                   FROM (SELECT * FROM runs ORDER BY id DESC LIMIT ?) ORDER BY id ASC""",
                (limit,),
            ).fetchall()

        broken = []
        for i, (entry_id, prev_hash, stored, command, data, timestamp, version) in enumerate(rows):
            if _entry_hash(entry_id, prev_hash, command, data, timestamp, version) != stored:
                broken.append({"id": entry_id, "issue": "hash_mismatch"})
            if i > 0 and prev_hash != rows[i - 1][2]:
                broken.append({"id": entry_id, "issue": "chain_break"})
        return {"verified": not broken, "entries_checked": len(rows), "broken_links": broken}

    def count(self, command: Optional[str] = None) -> int:
        with self._get_conn() as conn:
            if command:
                row = conn.execute("SELECT COUNT(*) FROM runs WHERE command = ?", (command,)).fetchone()
            else:
                row = conn.execute("SELECT COUNT(*) FROM runs").fetchone()
        return row[0] if row else 0


def get_ledger() -> RunLedger | None:
    """Ledger at NODA_LEDGER_PATH, or None when disabled."""
    if not settings.LEDGER_ENABLED:
        return None
    return RunLedger(settings.LEDGER_PATH)
