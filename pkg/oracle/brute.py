# oracle/brute.py
"""Brute-force references: grid minimization, finite differences, long reference runs."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from config import env_loader
from config.errors import DomainViolationError, InvalidInputError, NoFeasiblePointError
from solvers.pfdr import SolverState, SolveConfig, StopRule, solve
from solvers.problem import SplitProblem, eval_objective

logger = logging.getLogger(__name__)

REFERENCE_ITERS = env_loader.get_int("PFDR_REFERENCE_ITERS", 100_000)
MAX_DIMS = 3
COARSE_BUDGET = 250_000   # grid points in the initial exhaustive scan
REFINE_FACTOR = 10
REFINE_HALF_WIDTH = 2     # refinement window, in units of the previous spacing

# objective(points) with points shaped (n, d) -> values shaped (n,); +inf marks infeasible
GridObjective = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GridResult:
    point: np.ndarray
    value: float
    spacing: float


def _mesh(axes: Sequence[np.ndarray]) -> np.ndarray:
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _best(objective: GridObjective, pts: np.ndarray) -> Tuple[np.ndarray, float]:
    vals = np.asarray(objective(pts), dtype=np.float64).reshape(-1)
    vals = np.where(np.isnan(vals), np.inf, vals)
    i = int(np.argmin(vals))
    return pts[i], float(vals[i])


def grid_minimize(objective: GridObjective, box: Sequence[Tuple[float, float]],
                  resolution: float = 1e-4, passes: int = 2) -> GridResult:
    """Exhaustive scan of `box`, then refinement passes 10x finer around the incumbent
    until the spacing is `passes` decades below `resolution`.

    The initial scan uses `resolution` or, when that exceeds COARSE_BUDGET points, the
    finest spacing within budget; refinement then reaches the requested resolution.
    """
    box = [(float(lo), float(hi)) for lo, hi in box]
    d = len(box)
    if not 1 <= d <= MAX_DIMS:
        raise InvalidInputError(f"grid oracle handles 1 to {MAX_DIMS} dimensions, got {d}")
    if resolution <= 0:
        raise InvalidInputError("resolution must be positive")
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(hi >= lo)):
        raise InvalidInputError("grid box must be finite with lo <= hi")

    width = float(np.max(hi - lo))
    per_dim = int(np.floor(COARSE_BUDGET ** (1.0 / d)))
    h = max(resolution, width / max(per_dim - 1, 1)) if width > 0 else resolution
    axes = [np.linspace(a, b, int(round((b - a) / h)) + 1) if b > a else np.array([a])
            for a, b in zip(lo, hi)]
    point, value = _best(objective, _mesh(axes))
    if not np.isfinite(value):
        raise NoFeasiblePointError("objective is +inf on every grid point")

    target = resolution / REFINE_FACTOR ** passes
    while h > target * (1 + 1e-9):
        step = h / REFINE_FACTOR
        n = 2 * REFINE_HALF_WIDTH * REFINE_FACTOR + 1
        offsets = np.linspace(-REFINE_HALF_WIDTH * h, REFINE_HALF_WIDTH * h, n)
        axes = [np.unique(np.clip(c + offsets, a, b)) for c, a, b in zip(point, lo, hi)]
        cand, val = _best(objective, _mesh(axes))
        if val <= value:
            point, value = cand, val
        h = step
    return GridResult(np.array(point, dtype=np.float64), value, h)


def fd_gradient(f: Callable[[np.ndarray], float], x, h: float = 1e-6) -> np.ndarray:
    """Central differences (f(x + h e_j) - f(x - h e_j)) / 2h, shaped like x."""
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = np.empty_like(flat)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + h
        fp = float(f(x))
        flat[j] = orig - h
        fm = float(f(x))
        flat[j] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise DomainViolationError(f"non-finite value within {h:g} of coordinate {j}")
        out[j] = (fp - fm) / (2.0 * h)
    return out.reshape(x.shape)


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    x: np.ndarray
    f_inf: float
    z: List[np.ndarray]
    state: SolverState


def reference_solution(problem: SplitProblem, iters: Optional[int] = None,
                       threads: int = 1) -> ReferenceSolution:
    """PFDR run for a fixed iteration count with no stopping rule: F_∞ and the Fejér
    reference z*."""
    iters = REFERENCE_ITERS if iters is None else int(iters)
    config = SolveConfig(stop=StopRule("iters", iters), log_every=max(iters, 1),
                         threads=threads, residual=False)
    result = solve(problem, config)
    f_inf = eval_objective(problem, result.x)
    logger.info("%s: reference F_inf = %.17g after %d iterations", problem.name, f_inf, iters)
    return ReferenceSolution(result.x, f_inf, [zi.copy() for zi in result.state.z], result.state)
