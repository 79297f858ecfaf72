# problems/eeg.py
"""Sparse, piecewise-constant, nonnegative source recovery on a graph:

    F(x) = ½‖y - Φx‖² + Σ_(u,v) λ_uv |x_u - x_v| + Σ_v μ_v |x_v| + ι_{x >= 0}
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config.errors import InvalidInputError
from graphs.graph import Graph, chain_graph
from operators.prox import prox_l1_positive
from operators.smooth import DenseOperator, floored_jacobi, least_squares_term, power_method_sqnorm
from problems.functionals import eeg_objective, is_nonnegative
from solvers.ppd import PrimalDualSplitting, build_ppd_splitting_eeg
from solvers.problem import ETA, PGFB_RESERVE, ProblemIngredients, SplitProblem, configure

logger = logging.getLogger(__name__)

GAMMA_MODES = ("strict", "jacobi")


@dataclass(frozen=True, eq=False)
class EEGInstance:
    phi: DenseOperator
    y: np.ndarray
    graph: Graph                       # edge_tv_weight holds the per-edge TV weights
    lambda_l1: np.ndarray              # per vertex
    x_true: Optional[np.ndarray] = None
    name: str = "eeg"

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        n_obs, n_var = self.phi.shape
        l1 = np.broadcast_to(np.asarray(self.lambda_l1, dtype=np.float64), (n_var,)).copy()
        if y.shape[0] != n_obs:
            raise InvalidInputError(f"y has {y.shape[0]} entries, Φ has {n_obs} rows")
        if self.graph.num_vertices != n_var:
            raise InvalidInputError(f"graph has {self.graph.num_vertices} vertices, Φ has {n_var} columns")
        if np.any(~np.isfinite(l1)) or np.any(l1 < 0):
            raise InvalidInputError("ℓ1 weights must be finite and nonnegative")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "lambda_l1", l1)
        if self.x_true is not None:
            object.__setattr__(self, "x_true", np.asarray(self.x_true, dtype=np.float64).reshape(-1))

    @property
    def num_vertices(self) -> int:
        return self.graph.num_vertices

    @property
    def lambda_tv(self) -> np.ndarray:
        return self.graph.edge_tv_weight


def _l1_positive_prox(v, metric, param):
    return prox_l1_positive(v, param, metric)


def eeg_ingredients(instance: EEGInstance, gamma_mode: str = "strict", eta: float = ETA,
                    ell: Optional[float] = None) -> ProblemIngredients:
    """Least-squares f with L = ℓ Id ("strict") or the floored Jacobi diagonal ("jacobi")."""
    if gamma_mode not in GAMMA_MODES:
        raise InvalidInputError(f"gamma mode must be one of {GAMMA_MODES}, got {gamma_mode!r}")
    if gamma_mode == "jacobi":
        logger.warning("jacobi preconditioning: step-bound is only guaranteed for a diagonal Φ*Φ")
        smooth = least_squares_term(instance.phi, instance.y, curvature=floored_jacobi(instance.phi))
    else:
        if ell is None:
            ell = power_method_sqnorm(instance.phi).value
        smooth = least_squares_term(instance.phi, instance.y, ell=ell)
    return ProblemIngredients(
        shape=(instance.num_vertices,),
        graph=instance.graph,
        smooth=smooth,
        objective=eeg_objective(instance.phi, instance.y, instance.graph, instance.lambda_l1),
        h_prox=_l1_positive_prox,
        h_param=instance.lambda_l1,
        feasible=is_nonnegative,
        x0=np.zeros(instance.num_vertices),
        eta=eta,
        name=instance.name,
    )


def build_eeg_problem(instance: EEGInstance, mode: str = "pfdr", gamma_mode: str = "strict",
                      eta: float = ETA, reserve: float = PGFB_RESERVE) -> SplitProblem:
    return configure(eeg_ingredients(instance, gamma_mode, eta), mode, reserve)


def build_eeg_ppd(instance: EEGInstance) -> PrimalDualSplitting:
    return build_ppd_splitting_eeg(instance.phi, instance.y, instance.graph, instance.lambda_l1)


def synth_eeg(seed: int, num_vertices: int, num_observations: int, support_size: int,
              noise: float = 0.01, lambda_tv: float = 0.1, lambda_l1: float = 0.05,
              num_pieces: int = 2, graph: Optional[Graph] = None) -> EEGInstance:
    """Planted piecewise-constant x̂ >= 0 on a contiguous run of `support_size` vertices
    of a chain, amplitudes in [1, 2]; Φ Gaussian with variance 1/N; y = Φx̂ + noise."""
    if not 0 <= support_size <= num_vertices:
        raise InvalidInputError("support size must lie in [0, num_vertices]")
    if num_vertices < 1 or num_observations < 1:
        raise InvalidInputError("need at least one vertex and one observation")
    rng = np.random.default_rng(seed)
    x_true = np.zeros(num_vertices)
    if support_size:
        start = int(rng.integers(0, num_vertices - support_size + 1))
        pieces = max(1, min(num_pieces, support_size))
        cuts = np.sort(rng.choice(np.arange(1, support_size), size=pieces - 1, replace=False)) \
            if pieces > 1 else np.array([], dtype=int)
        amps = rng.uniform(1.0, 2.0, size=pieces)
        bounds = np.concatenate([[0], cuts, [support_size]]).astype(int)
        for amp, lo, hi in zip(amps, bounds[:-1], bounds[1:]):
            x_true[start + lo:start + hi] = amp
    phi = DenseOperator(rng.standard_normal((num_observations, num_vertices)) / np.sqrt(num_observations))
    y = phi.apply(x_true) + noise * rng.standard_normal(num_observations)
    g = graph if graph is not None else chain_graph(num_vertices)
    return EEGInstance(phi, y, g.with_weights(lambda_tv), np.full(num_vertices, float(lambda_l1)),
                       x_true, name=f"eeg-synth-{seed}")
