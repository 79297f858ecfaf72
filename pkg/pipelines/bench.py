# pipelines/bench.py
"""Run pfdr, pgfb and ppd on one instance under matched stopping levels and compare them
against a long reference run.

Every solver runs once to the tightest level with every iteration logged; the iterate
and the log record at the first iteration satisfying each looser level are captured on
the way, so all levels of the summary come from the same trajectory.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from config.errors import DomainViolationError, InvalidInputError
from oracle.brute import REFERENCE_ITERS, reference_solution
from pipelines.solve import (
    SOLVERS,
    RunSpec,
    build_problem,
    out_dir,
    run_solver,
    solution_metrics,
    spec_from_args,
)
from solvers.convergence import LogRecord
from solvers.pfdr import StopRule
from storage import registry
from storage.bundle import Instance, load_bundle

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = "rel-evol=1e-3,rel-evol=1e-4,rel-evol=1e-5,rel-evol=1e-6"
SUMMARY_FILE = "summary.csv"


def parse_levels(text: str) -> List[StopRule]:
    """Comma-separated stop rules of one kind, returned loosest first."""
    rules = [StopRule.parse(t) for t in text.split(",") if t.strip()]
    if not rules:
        raise InvalidInputError("bench needs at least one stopping level")
    kinds = {r.kind for r in rules}
    if len(kinds) != 1:
        raise InvalidInputError(f"stopping levels must share one kind, got {sorted(kinds)}")
    if rules[0].kind == "iters":
        return sorted(rules, key=lambda r: r.threshold)
    return sorted(rules, key=lambda r: -r.threshold)


def _reached(level: StopRule, record: LogRecord) -> bool:
    if level.kind == "iters":
        return record.iteration >= level.threshold
    return record.iteration > 0 and level.fired(record.rel_evol, record.max_evol)


@dataclass
class LevelCapture:
    """First logged iterate satisfying each level, in level order."""
    levels: List[StopRule]
    feasible: Optional[Callable[[np.ndarray], bool]] = None
    records: List[Optional[LogRecord]] = field(init=False)
    iterates: List[Optional[np.ndarray]] = field(init=False)
    exact_upto: List[Optional[float]] = field(init=False)
    _exact: List[bool] = field(init=False, default_factory=list)

    def __post_init__(self):
        n = len(self.levels)
        self.records, self.iterates, self.exact_upto = [None] * n, [None] * n, [None] * n

    def __call__(self, x: np.ndarray, record: LogRecord) -> None:
        if self.feasible is not None:
            self._exact.append(bool(self.feasible(x)))
        for i, level in enumerate(self.levels):
            if self.records[i] is None and _reached(level, record):
                self.records[i] = record
                self.iterates[i] = np.array(x, copy=True)
                self.exact_upto[i] = float(np.mean(self._exact)) if self._exact else float("nan")

    def fill_missing(self, x: np.ndarray, record: LogRecord) -> None:
        """Levels the run never reached report its final iterate."""
        frac = float(np.mean(self._exact)) if self._exact else float("nan")
        for i in range(len(self.levels)):
            if self.records[i] is None:
                self.records[i], self.iterates[i], self.exact_upto[i] = record, np.array(x, copy=True), frac


def _summary_row(solver: str, level: StopRule, record: Optional[LogRecord], f_inf: float,
                 metrics: Dict[str, float], exact: Optional[float], violation: bool) -> dict:
    nan = float("nan")
    row = {
        "solver": solver,
        "level": str(level),
        "iter": record.iteration if record else "",
        "time_s": record.time_s if record else nan,
        "objective": record.objective if record else nan,
        "F_minus_Finf": record.objective - f_inf if record else nan,
        "constraint_exact_fraction": nan if exact is None else exact,
        "domain_violation": int(violation),
    }
    row.update(metrics)
    return row


def _write_summary(path: Path, rows: List[dict]) -> Path:
    fields: List[str] = []
    for row in rows:
        fields += [k for k in row if k not in fields]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return path


def run_bench(instance: Instance, levels: Sequence[StopRule], base: RunSpec, out: Path,
              reference_iters: Optional[int] = None, solvers: Sequence[str] = SOLVERS,
              seed: int = 0, instance_path: str = "") -> dict:
    levels = list(levels)
    tightest = levels[-1]
    pfdr_problem = build_problem(instance, RunSpec(eta=base.eta, gamma_mode=base.gamma_mode))
    reference = reference_solution(pfdr_problem, reference_iters, threads=base.threads)
    f_inf = reference.f_inf

    rows: List[dict] = []
    per_solver: Dict[str, dict] = {}
    for solver in solvers:
        spec = RunSpec(solver=solver, stop=tightest, rho=base.rho if solver != "ppd" else None,
                       eta=base.eta, gamma_mode=base.gamma_mode, reserve=base.reserve,
                       errors=base.errors if solver != "ppd" else None, threads=base.threads,
                       max_iters=base.max_iters, log_every=1)
        capture = LevelCapture(levels, feasible=pfdr_problem.feasible)
        violation, log = False, None
        try:
            outcome = run_solver(instance, spec, capture)
            log = outcome.log
            capture.fill_missing(outcome.x, log.final)
        except DomainViolationError as exc:
            violation = True
            log = getattr(exc, "log", None)
            logger.warning("%s/%s: %s", instance.name, solver, exc)

        log_path = None
        if log is not None and len(log):
            log_path = log.to_csv(out / f"{solver}_log.csv", f_inf=f_inf)
            final = log.final
            registry.register_run(instance_path or instance.name, solver, str(tightest), seed,
                                  final.objective, final.iteration, str(log_path), base.threads, final.time_s)

        for level, record, x, exact in zip(levels, capture.records, capture.iterates, capture.exact_upto):
            metrics = solution_metrics(instance, x) if x is not None else {}
            rows.append(_summary_row(solver, level, record, f_inf, metrics, exact, violation))

        final = log.final if log is not None and len(log) else None
        per_solver[solver] = {
            "log": str(log_path) if log_path else None,
            "iterations": final.iteration if final else None,
            "objective": final.objective if final else None,
            "F_minus_Finf": final.objective - f_inf if final else None,
            "stop_reason": log.stop_reason if log is not None else None,
            "domain_violation": violation,
        }

    summary = _write_summary(out / SUMMARY_FILE, rows)
    return {
        "instance": instance.name,
        "levels": [str(lv) for lv in levels],
        "F_inf": f_inf,
        "reference_iters": int(reference.state.k),
        "solvers": per_solver,
        "summary": str(summary),
    }


def cmd_bench(args) -> dict:
    if not getattr(args, "instance", None):
        raise InvalidInputError("bench needs --instance <bundle dir>")
    instance = load_bundle(args.instance)
    levels = parse_levels(getattr(args, "levels", None) or DEFAULT_LEVELS)
    base = spec_from_args(args)
    ref_iters = getattr(args, "reference_iters", None)
    report = run_bench(instance, levels, base, out_dir(args, instance),
                       reference_iters=int(ref_iters) if ref_iters else REFERENCE_ITERS,
                       seed=int(getattr(args, "seed", 0) or 0), instance_path=str(args.instance))
    return report
