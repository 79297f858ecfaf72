# tests/test_registry.py
from __future__ import annotations

import os
import sqlite3

from storage.registry import latest_run, list_runs, register_run


def test_register_and_query(tmp_path):
    log = tmp_path / "pfdr_log.csv"
    log.write_text("iter\n0\n")
    register_run("eeg-a", "pfdr", "rel-evol=1e-06", 3, 1.25, 40, str(log), threads=2, wall_time_s=0.5)
    register_run("eeg-a", "ppd", "rel-evol=1e-06", 3, 1.5, 90, str(log))
    register_run("lab-b", "pfdr", "iters=10", 0, 7.0, 10, str(tmp_path / "missing.csv"))

    row = latest_run("eeg-a", "pfdr")
    assert row["objective"] == 1.25 and row["iterations"] == 40
    assert row["threads"] == 2 and row["wall_time_s"] == 0.5
    assert latest_run("eeg-a")["solver"] == "ppd"
    assert latest_run("nothing") is None
    assert len(list_runs("eeg-a")) == 2
    assert len(list_runs(limit=10)) == 3


def test_old_database_is_migrated():
    db = os.environ["PFDR_REGISTRY_DB"]
    conn = sqlite3.connect(db)
    conn.execute("CREATE TABLE runs(instance TEXT, solver TEXT, stop_rule TEXT, seed INTEGER, "
                 "objective REAL, iterations INTEGER, log_path TEXT, ts INTEGER)")
    conn.execute("INSERT INTO runs VALUES ('old', 'pgfb', 'iters=5', 1, 2.0, 5, 'x.csv', 0)")
    conn.commit()
    conn.close()

    (row,) = list_runs("old")
    assert row["threads"] == 1 and row["wall_time_s"] is None
    register_run("old", "pfdr", "iters=5", 1, 1.0, 5, "y.csv", threads=4)
    assert latest_run("old")["threads"] == 4
