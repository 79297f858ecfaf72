# solvers/problem.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from config import env_loader
from config.errors import HypothesisViolationError, InvalidInputError
from graphs.graph import Graph
from graphs.layout import (
    BlockGroup,
    BlockLayout,
    BlockProx,
    DiagonalOperator,
    SplitWeights,
    compute_weight_heuristic,
    edge_group,
    full_group,
    validate_split_weights,
    zero_group,
)
from operators.prox import prox_edge_blocks
from operators.smooth import SmoothTerm

logger = logging.getLogger(__name__)

# ---------------- Config ----------------
ETA = env_loader.get_float("PFDR_ETA", 0.9)
PGFB_RESERVE = env_loader.get_float("PFDR_PGFB_RESERVE", 0.2)
RHO_SAFETY = 0.99

# J_{ΓC}: prox of h in the metric Γ⁻¹, called as full_prox(v, metric) on the shaped iterate
FullProx = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class SplitProblem:
    """Everything one PFDR/PGFB run consumes.

    The iterate is stored flat (size = prod(shape)); `smooth`, `full_prox`, `objective`
    and `feasible` see it reshaped to `shape`. `full_prox` None means C = 0.
    """
    shape: Tuple[int, ...]
    layout: BlockLayout
    weights: SplitWeights
    gamma: DiagonalOperator
    smooth: SmoothTerm
    objective: Callable[[np.ndarray], float]
    full_prox: Optional[FullProx] = None
    feasible: Optional[Callable[[np.ndarray], bool]] = None
    x0: Optional[np.ndarray] = None
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if self.layout.size != self.size:
            raise InvalidInputError(f"layout size {self.layout.size} != problem size {self.size}")
        if self.gamma.values.shape != (self.size,):
            raise InvalidInputError(f"Γ has shape {self.gamma.values.shape}, expected ({self.size},)")
        if self.x0 is not None:
            x0 = np.array(self.x0, dtype=np.float64).reshape(-1)
            if x0.shape[0] != self.size:
                raise InvalidInputError("x0 does not match the problem size")
            x0.setflags(write=False)
            object.__setattr__(self, "x0", x0)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def num_blocks(self) -> int:
        return self.layout.num_blocks

    @cached_property
    def block_metrics(self) -> Tuple[np.ndarray, ...]:
        """W_i Γ⁻¹ restricted to each block, shaped like the group coords."""
        return tuple(w / self.gamma.values[g.coords]
                     for g, w in zip(self.layout.groups, self.weights.per_group))

    @cached_property
    def inverse_gamma(self) -> np.ndarray:
        return (1.0 / self.gamma.values).reshape(self.shape)

    def gradient(self, x_flat: np.ndarray) -> np.ndarray:
        return np.asarray(self.smooth.gradient(x_flat.reshape(self.shape)),
                          dtype=np.float64).reshape(-1)

    def resolvent_full(self, v_flat: np.ndarray) -> np.ndarray:
        if self.full_prox is None:
            return v_flat.copy()
        return np.asarray(self.full_prox(v_flat.reshape(self.shape), self.inverse_gamma),
                          dtype=np.float64).reshape(-1)

    def memory_footprint(self) -> Dict[str, int]:
        return {
            "blocks": self.num_blocks,
            "auxiliary_scalars": int(sum(g.coords.size for g in self.layout.groups)),
            "iterate_scalars": self.size,
        }


def eval_objective(problem: SplitProblem, x) -> float:
    """F(x) including indicator terms; nan is reported as +inf."""
    x = np.asarray(x, dtype=np.float64).reshape(problem.shape)
    val = float(problem.objective(x))
    return float("inf") if np.isnan(val) else val


# ---------------- Hypotheses ----------------
def curvature_norm(problem: SplitProblem) -> float:
    """‖L^{1/2} Γ L^{1/2}‖ = max_j L_j Γ_j for diagonal L (scalar ℓ gives ℓ max Γ)."""
    if problem.smooth.is_zero:
        return 0.0
    return float(np.max(problem.smooth.curvature.values.reshape(-1) * problem.gamma.values))


def rho_upper_bound(problem: SplitProblem) -> float:
    return 2.0 - 0.5 * curvature_norm(problem)


def default_rho(problem: SplitProblem) -> float:
    return min(1.0, RHO_SAFETY * rho_upper_bound(problem))


def averagedness_constant(problem: SplitProblem) -> float:
    """α such that the PFDR map is α-averaged in the Γ⁻¹W metric."""
    return 1.0 / rho_upper_bound(problem)


def check_rho(problem: SplitProblem, rho: float) -> List[str]:
    upper = rho_upper_bound(problem)
    if not (np.isfinite(rho) and 0.0 < rho < upper):
        return [f"rho: {rho:.6g} outside ]0, {upper:.6g}["]
    return []


def check_hypotheses(problem: SplitProblem, rho: Optional[float] = None) -> List[str]:
    """Names every violated hypothesis; an empty list means the solve may start."""
    violations: List[str] = []
    if not problem.gamma.is_strictly_positive():
        violations.append("step-positivity: Γ must be strictly positive and finite")
    L = problem.smooth.curvature.values
    if not problem.smooth.is_zero:
        if L.size != problem.size:
            violations.append("curvature: L does not match the problem size")
        elif not (np.all(L > 0) and np.all(np.isfinite(L))):
            violations.append("curvature: L must be strictly positive and finite")
        elif problem.gamma.is_strictly_positive():
            norm = curvature_norm(problem)
            if not norm < 2.0:
                violations.append(f"step-bound: ‖L^1/2 Γ L^1/2‖ = {norm:.6g} is not < 2")
            elif not problem.smooth.exact_curvature:
                logger.warning("step-bound checked against a heuristic curvature; it only holds "
                               "if the Hessian of f is diagonal")
    report = validate_split_weights(problem.weights, problem.layout)
    violations.extend(report.violations())
    if rho is not None and not any(v.startswith("step-bound") for v in violations):
        violations.extend(check_rho(problem, rho))
    return violations


def require_hypotheses(problem: SplitProblem, rho: Optional[float] = None) -> None:
    violations = check_hypotheses(problem, rho)
    if violations:
        raise HypothesisViolationError(violations)


# ---------------- Configurations ----------------
def gamma_from_curvature(curvature: DiagonalOperator, eta: float = ETA,
                         smooth_is_zero: bool = False) -> DiagonalOperator:
    """Γ_j = 2η / L_j, so that max_j L_j Γ_j = 2η. With f = 0 any Γ works; Γ = Id."""
    if not 0.0 < eta < 1.0:
        raise InvalidInputError(f"eta must lie in ]0, 1[, got {eta}")
    L = curvature.values.reshape(-1)
    if smooth_is_zero:
        return DiagonalOperator(np.ones_like(L))
    if np.any(L <= 0):
        raise InvalidInputError("curvature must be strictly positive to derive Γ")
    return DiagonalOperator(2.0 * eta / L)


@dataclass(frozen=True, eq=False)
class ProblemIngredients:
    """F(x) = f(x) + Σ_e λ_e ‖x_u - x_v‖₁ + h(x) on a graph, before choosing a splitting.

    `h_prox(v, metric, param)` is the prox of h; None means h = 0. `channels` is K for
    (V, K) iterates and 1 for (V,) iterates.
    """
    shape: Tuple[int, ...]
    graph: Graph
    smooth: SmoothTerm
    objective: Callable[[np.ndarray], float]
    h_prox: Optional[BlockProx] = None
    h_param: Optional[np.ndarray] = None
    feasible: Optional[Callable[[np.ndarray], bool]] = None
    x0: Optional[np.ndarray] = None
    gamma: Optional[DiagonalOperator] = None
    eta: float = ETA
    name: str = "custom"

    @property
    def channels(self) -> int:
        return int(self.shape[1]) if len(self.shape) > 1 else 1

    def resolved_gamma(self) -> DiagonalOperator:
        if self.gamma is not None:
            return self.gamma
        return gamma_from_curvature(self.smooth.curvature, self.eta, self.smooth.is_zero)


def _edge_layout(ing: ProblemIngredients) -> BlockLayout:
    size = int(np.prod(ing.shape))
    groups: List[BlockGroup] = []
    if ing.graph.num_edges:
        groups.append(edge_group(ing.graph, ing.channels, prox_edge_blocks))
    return BlockLayout(size, tuple(groups))


def configure_pfdr(ing: ProblemIngredients) -> SplitProblem:
    """|E| edge blocks; h through J_{ΓC}; a zero block on coordinates no edge covers."""
    layout = _edge_layout(ing)
    uncovered = layout.uncovered()
    if uncovered.size:
        logger.info("%s: appending a zero block on %d uncovered coordinates",
                    ing.name, uncovered.size)
        layout = layout.with_group(zero_group(uncovered))
    weights = compute_weight_heuristic(ing.graph, layout, reserve=0.0)

    full_prox = None
    if ing.h_prox is not None:
        h_prox, h_param = ing.h_prox, ing.h_param

        def full_prox(v, metric):
            return h_prox(v, metric, h_param)

    return SplitProblem(ing.shape, layout, weights, ing.resolved_gamma(), ing.smooth,
                        ing.objective, full_prox, ing.feasible, ing.x0, name=f"{ing.name}/pfdr")


def configure_pgfb(ing: ProblemIngredients, reserve: float = PGFB_RESERVE) -> SplitProblem:
    """C = 0; h moves into an extra full-support block weighted `reserve` where edges reach."""
    layout = _edge_layout(ing)
    if ing.h_prox is not None:
        layout = layout.with_group(full_group(ing.shape, ing.h_prox, param=ing.h_param))
        weights = compute_weight_heuristic(ing.graph, layout, reserve=reserve)
    else:
        uncovered = layout.uncovered()
        if uncovered.size:
            layout = layout.with_group(zero_group(uncovered))
        weights = compute_weight_heuristic(ing.graph, layout, reserve=0.0)
    return SplitProblem(ing.shape, layout, weights, ing.resolved_gamma(), ing.smooth,
                        ing.objective, None, ing.feasible, ing.x0, name=f"{ing.name}/pgfb")


def configure(ing: ProblemIngredients, mode: str, reserve: float = PGFB_RESERVE) -> SplitProblem:
    mode = mode.lower()
    if mode == "pfdr":
        return configure_pfdr(ing)
    if mode == "pgfb":
        return configure_pgfb(ing, reserve)
    raise InvalidInputError(f"unknown splitting mode {mode!r} (expected pfdr or pgfb)")
