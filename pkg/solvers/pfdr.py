# solvers/pfdr.py
"""Preconditioned forward-Douglas-Rachford iteration and its diagnostics.

One step, for blocks i with resolvents J_i = J_{W_i⁻¹ΓA_i} and the full-term resolvent
J_C = J_{ΓC}:

    p   = 2x - Γ(∇f(x) + b_k)
    z_i = z_i + ρ_k (J_i(p^{H_i} - z_i) + a_{i,k} - x^{H_i})
    x   = J_C(Σ_i W_i z_i) + c_k

The generalized forward-backward configuration is the same step with J_C = Id.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from config.errors import DomainViolationError, HypothesisViolationError, InvalidInputError
from graphs.layout import BlockGroup
from solvers.convergence import ConvergenceLog, LogRecord
from solvers.problem import (
    SplitProblem,
    check_rho,
    default_rho,
    eval_objective,
    require_hypotheses,
)

logger = logging.getLogger(__name__)

Rho = Union[float, Callable[[int], float]]


@dataclass
class SolverState:
    """z[g] holds group g's auxiliary variables shaped like its coords; x is flat."""
    z: List[np.ndarray]
    x: np.ndarray
    k: int = 0

    def copy(self) -> "SolverState":
        return SolverState([zi.copy() for zi in self.z], self.x.copy(), self.k)

    def expanded_z(self, problem: SplitProblem) -> List[np.ndarray]:
        """Dense (n_blocks, N) z per group, zero off each block's support."""
        out = []
        for g, zi in zip(problem.layout.groups, self.z):
            dense = np.zeros((g.num_blocks, problem.size))
            rows = np.arange(g.num_blocks)[:, None]
            dense[rows, g.coords.reshape(g.num_blocks, -1)] = zi.reshape(g.num_blocks, -1)
            out.append(dense)
        return out


def initial_state(problem: SplitProblem, x0=None) -> SolverState:
    """z_i = x0 restricted to H_i, with x0 = problem.x0 or 0."""
    if x0 is None:
        x0 = problem.x0 if problem.x0 is not None else np.zeros(problem.size)
    x0 = np.array(x0, dtype=np.float64).reshape(-1)
    if x0.shape[0] != problem.size:
        raise InvalidInputError(f"x0 has {x0.shape[0]} entries, problem has {problem.size}")
    return SolverState([x0[g.coords].copy() for g in problem.layout.groups], x0, 0)


# ---------------- Stopping and perturbations ----------------
@dataclass(frozen=True)
class StopRule:
    kind: str = "rel-evol"  # rel-evol | max-evol | iters
    threshold: float = 1e-6

    KINDS = ("rel-evol", "max-evol", "iters")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidInputError(f"unknown stop rule {self.kind!r}; use one of {self.KINDS}")
        if not self.threshold >= 0:
            raise InvalidInputError("stop threshold must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> "StopRule":
        """'rel-evol=1e-6', 'max-evol=1e-4' or 'iters=500'."""
        kind, sep, value = text.partition("=")
        if not sep:
            raise InvalidInputError(f"stop rule {text!r} is not of the form kind=value")
        try:
            threshold = float(value)
        except ValueError as exc:
            raise InvalidInputError(f"stop rule value {value!r} is not a number") from exc
        return cls(kind.strip(), threshold)

    def cap(self, max_iters: int) -> int:
        return int(self.threshold) if self.kind == "iters" else max_iters

    def fired(self, rel_evol: float, max_evol: float) -> bool:
        if self.kind == "rel-evol":
            return rel_evol < self.threshold
        if self.kind == "max-evol":
            return max_evol < self.threshold
        return False

    def __str__(self) -> str:
        return f"{self.kind}={self.threshold:g}"


@dataclass(frozen=True)
class ErrorInjection:
    """Seeded perturbations of 2-norm c / k^s on the gradient (b), the full-term
    resolvent (c) and the block resolvents (a). s > 1 keeps them summable."""
    c: float
    s: float
    seed: int = 0
    channels: Tuple[str, ...] = ("b", "c", "a")

    def __post_init__(self):
        if self.c < 0:
            raise InvalidInputError("error magnitude c must be nonnegative")
        if set(self.channels) - {"b", "c", "a"}:
            raise InvalidInputError(f"unknown error channels {self.channels}")
        if self.s <= 1:
            logger.warning("error envelope c/k^%g is not summable; convergence is not guaranteed",
                           self.s)

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "ErrorInjection":
        parts = [t.strip() for t in text.split(",")]
        if len(parts) != 2:
            raise InvalidInputError(f"--inject-errors expects 'c,s', got {text!r}")
        try:
            return cls(float(parts[0]), float(parts[1]), seed)
        except ValueError as exc:
            raise InvalidInputError(f"--inject-errors values must be numbers: {text!r}") from exc

    def envelope(self, k: int) -> float:
        return self.c / float(k) ** self.s

    def stream(self, problem: SplitProblem) -> "_ErrorStream":
        return _ErrorStream(self, problem)


class _ErrorStream:
    def __init__(self, spec: ErrorInjection, problem: SplitProblem):
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)
        self.shapes = [g.coords.shape for g in problem.layout.groups]
        self.size = problem.size

    def _scaled(self, n: int, k: int) -> np.ndarray:
        v = self.rng.standard_normal(n)
        norm = np.linalg.norm(v)
        return v * (self.spec.envelope(k) / norm) if norm > 0 else v

    def draw(self, k: int):
        b = self._scaled(self.size, k) if "b" in self.spec.channels else None
        c = self._scaled(self.size, k) if "c" in self.spec.channels else None
        a = None
        if "a" in self.spec.channels:
            sizes = [int(np.prod(s)) for s in self.shapes]
            flat = self._scaled(sum(sizes), k)
            parts = np.split(flat, np.cumsum(sizes)[:-1])
            a = [part.reshape(shape) for part, shape in zip(parts, self.shapes)]
        return b, c, a


class Perturbation(NamedTuple):
    b: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None
    a: Optional[Sequence[np.ndarray]] = None

    def norms(self) -> Tuple[float, float, float]:
        nb = float(np.linalg.norm(self.b)) if self.b is not None else 0.0
        nc = float(np.linalg.norm(self.c)) if self.c is not None else 0.0
        na = float(np.sqrt(sum(np.sum(ai * ai) for ai in self.a))) if self.a is not None else 0.0
        return nb, nc, na


# ---------------- One step ----------------
def _resolve_rows(group: BlockGroup, metric: np.ndarray, z: np.ndarray, p: np.ndarray,
                  rows=slice(None)) -> np.ndarray:
    c = group.coords[rows]
    param = None if group.param is None else group.param[rows]
    return group.prox(p[c] - z[rows], metric[rows], param)


def _update_rows(group, metric, z, p, x, rho, a, rows=slice(None)) -> np.ndarray:
    r = _resolve_rows(group, metric, z, p, rows)
    if a is not None:
        r = r + a[rows]
    return z[rows] + rho * (r - x[group.coords[rows]])


def _chunks(n: int, width: int) -> List[slice]:
    bounds = np.linspace(0, n, width + 1).astype(int)
    return [slice(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def _update_group(group, metric, z, p, x, rho, a, pool: Optional[Executor], width: int):
    if pool is None or width <= 1 or group.num_blocks < 2 * width:
        return _update_rows(group, metric, z, p, x, rho, a)
    futures = [pool.submit(_update_rows, group, metric, z, p, x, rho, a, rows)
               for rows in _chunks(group.num_blocks, width)]
    return np.concatenate([f.result() for f in futures], axis=0)


def aggregate(problem: SplitProblem, z: Sequence[np.ndarray]) -> np.ndarray:
    """Σ_i W_i z_i, summed in a fixed group and block order."""
    out = np.zeros(problem.size)
    for g, w, zi in zip(problem.layout.groups, problem.weights.per_group, z):
        out += np.bincount(g.coords.ravel(), weights=(w * zi).ravel(), minlength=problem.size)
    return out


def forward_point(problem: SplitProblem, x: np.ndarray, b: Optional[np.ndarray] = None) -> np.ndarray:
    grad = problem.gradient(x)
    if b is not None:
        grad = grad + b
    return 2.0 * x - problem.gamma.values * grad


def pfdr_step(state: SolverState, problem: SplitProblem, rho: float,
              errors: Optional[Perturbation] = None, pool: Optional[Executor] = None,
              width: int = 1) -> SolverState:
    """One relaxed step; returns a new state and leaves `state` untouched."""
    if state.x.shape != (problem.size,) or len(state.z) != len(problem.layout.groups):
        raise InvalidInputError("solver state does not match the problem dimensions")
    errors = errors or Perturbation()
    x = state.x
    p = forward_point(problem, x, errors.b)
    z_new = [
        _update_group(g, m, zi, p, x, rho, None if errors.a is None else errors.a[i], pool, width)
        for i, (g, m, zi) in enumerate(zip(problem.layout.groups, problem.block_metrics, state.z))
    ]
    x_new = problem.resolvent_full(aggregate(problem, z_new))
    if errors.c is not None:
        x_new = x_new + errors.c
    return SolverState(z_new, x_new, state.k + 1)


# ---------------- Diagnostics ----------------
def fixed_point_residual(state: SolverState, problem: SplitProblem) -> float:
    """max_i ‖J_i(p^{H_i} - z_i) - x^{H_i}‖_∞ together with ‖x - J_C(Σ W_i z_i)‖_∞.

    Zero exactly at fixed points; +inf when the gradient is undefined at x.
    """
    try:
        p = forward_point(problem, state.x)
    except DomainViolationError:
        return float("inf")
    worst = 0.0
    for g, m, zi in zip(problem.layout.groups, problem.block_metrics, state.z):
        if g.num_blocks:
            r = _resolve_rows(g, m, zi, p)
            worst = max(worst, float(np.max(np.abs(r - state.x[g.coords]))))
    full = problem.resolvent_full(aggregate(problem, state.z))
    return max(worst, float(np.max(np.abs(state.x - full))) if problem.size else 0.0)


def fejer_distance(state: SolverState, z_ref: Sequence[np.ndarray], problem: SplitProblem) -> float:
    """‖z - z_ref‖ in the Γ⁻¹W metric."""
    total = 0.0
    for m, zi, zr in zip(problem.block_metrics, state.z, z_ref):
        d = zi - zr
        total += float(np.sum(m * d * d))
    return float(np.sqrt(total))


def evolution(x_new: np.ndarray, x_old: np.ndarray) -> Tuple[float, float]:
    """(‖Δx‖₂ / ‖x_new‖₂, ‖Δx‖_∞)."""
    diff = x_new - x_old
    nd = float(np.linalg.norm(diff))
    nx = float(np.linalg.norm(x_new))
    rel = nd / nx if nx > 0 else (0.0 if nd == 0 else float("inf"))
    return rel, float(np.max(np.abs(diff))) if diff.size else 0.0


# ---------------- Solve ----------------
@dataclass
class SolveConfig:
    rho: Optional[Rho] = None
    stop: StopRule = field(default_factory=StopRule)
    max_iters: int = 10_000
    errors: Optional[ErrorInjection] = None
    log_every: int = 1
    threads: int = 1
    x0: Optional[np.ndarray] = None
    residual: bool = True
    # called as callback(state, record) after every logged record
    callback: Optional[Callable[[SolverState, LogRecord], None]] = None


class SolveResult(NamedTuple):
    x: np.ndarray
    state: SolverState
    log: ConvergenceLog


def _record(log: ConvergenceLog, problem: SplitProblem, state: SolverState, elapsed: float,
            rel: float, maxe: float, residual: bool, callback=None) -> None:
    x = state.x.reshape(problem.shape)
    exact = bool(problem.feasible(x)) if problem.feasible is not None else None
    fp = fixed_point_residual(state, problem) if residual else float("nan")
    rec = LogRecord(state.k, elapsed, eval_objective(problem, x), rel, maxe, fp)
    log.append(rec, exact)
    if callback is not None:
        callback(state, rec)


def solve(problem: SplitProblem, config: Optional[SolveConfig] = None) -> SolveResult:
    """Iterate pfdr_step until the stop rule fires or the iteration cap is reached.

    Refuses to start (HypothesisViolationError) when the step sizes, the split weights, the
    curvature or the relaxation range fail their checks. Wall time covers the steps only.
    """
    config = config or SolveConfig()
    schedule = config.rho if config.rho is not None else default_rho(problem)
    rho0 = schedule(1) if callable(schedule) else float(schedule)
    require_hypotheses(problem, rho0)
    if config.log_every < 1:
        raise InvalidInputError("log_every must be >= 1")
    cap = config.stop.cap(config.max_iters)
    if cap < 0:
        raise InvalidInputError("iteration cap must be nonnegative")

    state = initial_state(problem, config.x0)
    stream = config.errors.stream(problem) if config.errors is not None else None
    log = ConvergenceLog()
    logger.info("%s: %d blocks, rho=%s, stop=%s, cap=%d", problem.name, problem.num_blocks,
                "schedule" if callable(schedule) else f"{rho0:.6g}", config.stop, cap)
    _record(log, problem, state, 0.0, float("nan"), float("nan"), config.residual, config.callback)

    width = max(1, int(config.threads))
    pool = ThreadPoolExecutor(max_workers=width) if width > 1 else None
    elapsed, reason = 0.0, "max-iters"
    try:
        while state.k < cap:
            k = state.k + 1
            rho = float(schedule(k)) if callable(schedule) else rho0
            if callable(schedule):
                bad = check_rho(problem, rho)
                if bad:
                    raise HypothesisViolationError([f"{bad[0]} at iteration {k}"])
            perturb = Perturbation(*stream.draw(k)) if stream is not None else None
            if perturb is not None:
                log.injected.append((k, *perturb.norms()))

            t0 = time.perf_counter()
            try:
                new = pfdr_step(state, problem, rho, perturb, pool, width)
            except DomainViolationError as exc:
                err = DomainViolationError(str(exc), iteration=k)
                err.log = log
                logger.warning("%s: %s", problem.name, err)
                raise err from exc
            elapsed += time.perf_counter() - t0

            rel, maxe = evolution(new.x, state.x)
            state = new
            stop = config.stop.fired(rel, maxe)
            if stop or state.k == cap or state.k % config.log_every == 0:
                _record(log, problem, state, elapsed, rel, maxe, config.residual, config.callback)
            if stop:
                reason = str(config.stop)
                break
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    log.stop_reason = reason
    logger.info("%s: stopped (%s) after %d iterations, F=%.12g", problem.name, reason,
                state.k, log.final.objective)
    return SolveResult(state.x.reshape(problem.shape).copy(), state, log)
