# storage/registry.py
from __future__ import annotations

from pathlib import Path
import sqlite3
import time

from config import env_loader

DB_ENV = "PFDR_REGISTRY_DB"

# columns added after the first schema; older databases are migrated on connect
_LATE_COLUMNS = {"threads": "INTEGER DEFAULT 1", "wall_time_s": "REAL"}


def _db_path() -> Path:
    return Path(env_loader.get(DB_ENV, "storage/registry.db"))


def _conn():
    db = _db_path()
    db.parent.mkdir(parents=True, exist_ok=True)
    conn = sqlite3.connect(db)
    conn.row_factory = sqlite3.Row
    conn.execute(
        """CREATE TABLE IF NOT EXISTS runs(
             instance   TEXT,
             solver     TEXT,
             stop_rule  TEXT,
             seed       INTEGER,
             objective  REAL,
             iterations INTEGER,
             log_path   TEXT,
             ts         INTEGER
        )"""
    )
    conn.commit()
    _migrate(conn)
    return conn


def _migrate(conn: sqlite3.Connection):
    """Add the late columns to databases created before them."""
    cols = {row[1] for row in conn.execute("PRAGMA table_info(runs)").fetchall()}
    for name, decl in _LATE_COLUMNS.items():
        if name not in cols:
            conn.execute(f"ALTER TABLE runs ADD COLUMN {name} {decl}")
    conn.commit()


def register_run(instance: str, solver: str, stop_rule: str, seed: int, objective: float,
                 iterations: int, log_path: str, threads: int = 1, wall_time_s: float = None):
    conn = _conn()
    # log file mtime when it exists; fallback to now
    try:
        ts = int(Path(log_path).stat().st_mtime)
    except OSError:
        ts = int(time.time())
    conn.execute(
        "INSERT INTO runs (instance, solver, stop_rule, seed, objective, iterations, log_path, ts, "
        "threads, wall_time_s) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
        (str(instance), solver, stop_rule, int(seed), float(objective), int(iterations),
         str(log_path), ts, int(threads), wall_time_s),
    )
    conn.commit()
    conn.close()


def latest_run(instance: str, solver: str = None) -> dict | None:
    conn = _conn()
    if solver is None:
        cur = conn.execute(
            "SELECT * FROM runs WHERE instance=? ORDER BY ts DESC, rowid DESC LIMIT 1", (str(instance),))
    else:
        cur = conn.execute(
            "SELECT * FROM runs WHERE instance=? AND solver=? ORDER BY ts DESC, rowid DESC LIMIT 1",
            (str(instance), solver))
    row = cur.fetchone()
    conn.close()
    return dict(row) if row else None


def list_runs(instance: str = None, limit: int = 5):
    conn = _conn()
    if instance is None:
        cur = conn.execute("SELECT * FROM runs ORDER BY ts DESC, rowid DESC LIMIT ?", (limit,))
    else:
        cur = conn.execute(
            "SELECT * FROM runs WHERE instance=? ORDER BY ts DESC, rowid DESC LIMIT ?", (str(instance), limit))
    rows = [dict(r) for r in cur.fetchall()]
    conn.close()
    return rows
