# pipelines/solve.py
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np

from config import env_loader
from config.errors import InvalidInputError
from metrics.evaluation import approx_support_2means, argmax_labels, avg_f1, dice_score
from problems.eeg import EEGInstance, build_eeg_ppd, build_eeg_problem
from problems.labeling import build_labeling_ppd, build_labeling_problem
from solvers.convergence import ConvergenceLog
from solvers.pfdr import ErrorInjection, SolveConfig, StopRule, solve
from solvers.ppd import PPDConfig, ppd_solve
from solvers.problem import ETA, PGFB_RESERVE, SplitProblem
from storage import registry
from storage.bundle import Instance, load_bundle
from storage.formats import write_matrix, write_vector

logger = logging.getLogger(__name__)

# ---------------- Config ----------------
SOLVERS = ("pfdr", "pgfb", "ppd")
DEFAULT_STOP = env_loader.get("PFDR_STOP", "rel-evol=1e-6")
DEFAULT_MAX_ITERS = env_loader.get_int("PFDR_MAX_ITERS", 10_000)
OUT_ROOT = env_loader.get("PFDR_OUT_ROOT", "runs")


@dataclass
class RunSpec:
    """Everything one solver run needs besides the instance."""
    solver: str = "pfdr"
    stop: StopRule = field(default_factory=StopRule)
    rho: Optional[float] = None
    eta: float = ETA
    gamma_mode: str = "strict"
    reserve: float = PGFB_RESERVE
    errors: Optional[ErrorInjection] = None
    threads: int = 1
    max_iters: int = DEFAULT_MAX_ITERS
    log_every: int = 1

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise InvalidInputError(f"unknown solver {self.solver!r}; use one of {SOLVERS}")
        if self.solver == "ppd" and self.errors is not None:
            raise InvalidInputError("error injection applies to pfdr and pgfb only")
        if self.rho is not None and self.solver == "ppd":
            raise InvalidInputError("--rho applies to pfdr and pgfb only")


@dataclass
class RunOutcome:
    x: np.ndarray
    log: ConvergenceLog


def build_problem(instance: Instance, spec: RunSpec) -> SplitProblem:
    if isinstance(instance, EEGInstance):
        return build_eeg_problem(instance, spec.solver, spec.gamma_mode, spec.eta, spec.reserve)
    return build_labeling_problem(instance, spec.solver, spec.eta, spec.reserve)


def run_solver(instance: Instance, spec: RunSpec,
               callback: Optional[Callable[[np.ndarray, object], None]] = None) -> RunOutcome:
    """Run one solver; `callback(x, record)` sees every logged iterate (x shaped like the
    problem, owned by the solver: copy it to keep it)."""
    if spec.solver == "ppd":
        splitting = build_eeg_ppd(instance) if isinstance(instance, EEGInstance) else build_labeling_ppd(instance)
        result = ppd_solve(splitting, PPDConfig(spec.stop, spec.max_iters, spec.log_every, callback))
        return RunOutcome(result.x, result.log)

    problem = build_problem(instance, spec)
    hook = None
    if callback is not None:
        def hook(state, record):
            callback(state.x.reshape(problem.shape), record)
    config = SolveConfig(rho=spec.rho, stop=spec.stop, max_iters=spec.max_iters, errors=spec.errors,
                         log_every=spec.log_every, threads=spec.threads, callback=hook)
    result = solve(problem, config)
    return RunOutcome(result.x, result.log)


def solution_metrics(instance: Instance, x: np.ndarray) -> Dict[str, float]:
    """Dice and 2-means Dice against x̂ (EEG) or avg F1 against ℓ̂ (labeling); empty
    when the instance has no ground truth."""
    if isinstance(instance, EEGInstance):
        if instance.x_true is None:
            return {}
        support = approx_support_2means(x)
        return {"dice": dice_score(x, instance.x_true),
                "dice_2means": dice_score(support.mask(x.size).astype(np.float64), instance.x_true)}
    if instance.labels_true is None:
        return {}
    return {"avg_f1": avg_f1(argmax_labels(x), instance.labels_true, num_labels=instance.num_labels)}


def write_solution(path, x: np.ndarray) -> Path:
    return write_matrix(path, x) if x.ndim == 2 else write_vector(path, x)


def spec_from_args(args) -> RunSpec:
    inject = getattr(args, "inject_errors", None)
    seed = int(getattr(args, "seed", 0) or 0)
    return RunSpec(
        solver=getattr(args, "solver", None) or "pfdr",
        stop=StopRule.parse(getattr(args, "stop", None) or DEFAULT_STOP),
        rho=getattr(args, "rho", None),
        eta=float(getattr(args, "eta", None) or ETA),
        gamma_mode=getattr(args, "gamma_mode", None) or "strict",
        errors=ErrorInjection.parse(inject, seed) if inject else None,
        threads=int(getattr(args, "threads", None) or 1),
        max_iters=int(getattr(args, "max_iters", None) or DEFAULT_MAX_ITERS),
    )


def out_dir(args, instance: Instance) -> Path:
    out = getattr(args, "out", None)
    return Path(out) if out else Path(OUT_ROOT) / instance.name


def cmd_solve(args) -> dict:
    """Load a bundle, run one solver, write <solver>_log.csv and <solver>_x.csv, register
    the run. Returns the report printed by the CLI."""
    if not getattr(args, "instance", None):
        raise InvalidInputError("solve needs --instance <bundle dir>")
    instance = load_bundle(args.instance)
    spec = spec_from_args(args)
    outcome = run_solver(instance, spec)

    out = out_dir(args, instance)
    log_path = outcome.log.to_csv(out / f"{spec.solver}_log.csv")
    x_path = write_solution(out / f"{spec.solver}_x.csv", outcome.x)
    final = outcome.log.final
    registry.register_run(args.instance, spec.solver, str(spec.stop), int(getattr(args, "seed", 0) or 0),
                          final.objective, final.iteration, str(log_path), spec.threads, final.time_s)
    logger.info("%s/%s: F=%.12g after %d iterations (%.3fs)", instance.name, spec.solver,
                final.objective, final.iteration, final.time_s)

    report = {
        "instance": instance.name,
        "solver": spec.solver,
        "stop_rule": str(spec.stop),
        "stop_reason": outcome.log.stop_reason,
        "iterations": final.iteration,
        "objective": final.objective,
        "wall_time_s": final.time_s,
        "constraint_exact_fraction": outcome.log.feasibility_fraction(),
        "log": str(log_path),
        "solution": str(x_path),
    }
    report.update(solution_metrics(instance, outcome.x))
    return report
