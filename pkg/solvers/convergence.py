# solvers/convergence.py
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from config.errors import InvalidInputError

COLUMNS = ("iter", "time_s", "objective", "rel_evol", "max_evol", "fp_residual")
GAP_COLUMN = "F_minus_Finf"


@dataclass(frozen=True)
class LogRecord:
    iteration: int
    time_s: float
    objective: float
    rel_evol: float
    max_evol: float
    fp_residual: float


@dataclass
class ConvergenceLog:
    """Per-iteration records of one solve; iteration 0 is the initialization."""
    records: List[LogRecord] = field(default_factory=list)
    stop_reason: str = ""
    constraint_exact: List[bool] = field(default_factory=list)
    injected: List[tuple] = field(default_factory=list)   # (k, ‖b_k‖, ‖c_k‖, ‖a_k‖)

    def append(self, record: LogRecord, constraint_exact: Optional[bool] = None) -> None:
        if self.records and record.iteration <= self.records[-1].iteration:
            raise InvalidInputError(
                f"log iterations must increase: {record.iteration} after {self.records[-1].iteration}")
        if not np.isfinite(record.time_s):
            raise InvalidInputError("log wall time must be finite")
        self.records.append(record)
        if constraint_exact is not None:
            self.constraint_exact.append(bool(constraint_exact))

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final(self) -> LogRecord:
        if not self.records:
            raise InvalidInputError("empty convergence log")
        return self.records[-1]

    @property
    def iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    def column(self, name: str) -> np.ndarray:
        attr = "iteration" if name == "iter" else name
        return np.array([getattr(r, attr) for r in self.records], dtype=np.float64)

    def as_array(self) -> np.ndarray:
        return np.array([[r.iteration, r.time_s, r.objective, r.rel_evol, r.max_evol, r.fp_residual]
                         for r in self.records], dtype=np.float64).reshape(-1, len(COLUMNS))

    def feasibility_fraction(self) -> float:
        if not self.constraint_exact:
            return float("nan")
        return float(np.mean(self.constraint_exact))

    def to_csv(self, path, f_inf: Optional[float] = None) -> Path:
        """Full-precision CSV; with `f_inf` an extra F_minus_Finf column is appended."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = self.as_array()
        header = ",".join(COLUMNS)
        if f_inf is not None:
            data = np.column_stack([data, data[:, 2] - f_inf])
            header += "," + GAP_COLUMN
        fmt = ["%d"] + ["%.17g"] * (data.shape[1] - 1)
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=fmt)
        return path


def read_log_csv(path) -> np.ndarray:
    """Numeric rows of a log CSV written by ConvergenceLog.to_csv."""
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
