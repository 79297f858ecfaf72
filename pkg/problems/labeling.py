# problems/labeling.py
"""Spatial regularization of per-vertex label distributions:

    F(p) = Σ_v KL(βu + (1-β)q_v, βu + (1-β)p_v) + Σ_(u,v) λ_uv ‖p_u - p_v‖₁ + ι_{Δ_K^V}(p)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from config.errors import InvalidInputError
from graphs.graph import Graph, chain_graph, grid_graph
from metrics.evaluation import entropy_uncertainty
from operators.prox import project_simplex
from operators.smooth import smoothed_kl_term
from problems.functionals import labeling_objective, on_simplices
from solvers.ppd import PrimalDualSplitting, build_ppd_splitting_labeling
from solvers.problem import ETA, PGFB_RESERVE, ProblemIngredients, SplitProblem, configure

DEFAULT_BETA = 0.1
Q_SIMPLEX_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LabelingInstance:
    graph: Graph
    q: np.ndarray                        # (V, K) rows on the simplex
    beta: float = DEFAULT_BETA
    labels_true: Optional[np.ndarray] = None
    train: Optional[np.ndarray] = None   # training subset U for λ selection
    name: str = "labeling"

    def __post_init__(self):
        q = np.array(self.q, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != self.graph.num_vertices:
            raise InvalidInputError(f"q must be shaped ({self.graph.num_vertices}, K), got {q.shape}")
        if not on_simplices(q, 0.0, Q_SIMPLEX_TOL):
            raise InvalidInputError("every row of q must lie on the simplex")
        if not 0.0 < self.beta < 1.0:
            raise InvalidInputError(f"beta must lie in ]0, 1[, got {self.beta}")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        if self.labels_true is not None:
            object.__setattr__(self, "labels_true", np.asarray(self.labels_true, dtype=np.int64).ravel())
        if self.train is not None:
            object.__setattr__(self, "train", np.asarray(self.train, dtype=np.int64).ravel())

    @property
    def num_labels(self) -> int:
        return int(self.q.shape[1])

    def with_lambda(self, lam) -> "LabelingInstance":
        return replace(self, graph=self.graph.with_weights(lam))


def _simplex_prox(v, metric, param=None):
    return project_simplex(v, metric)


def labeling_ingredients(instance: LabelingInstance, eta: float = ETA) -> ProblemIngredients:
    """Smoothed KL with its exact diagonal curvature; iterates start at q."""
    return ProblemIngredients(
        shape=instance.q.shape,
        graph=instance.graph,
        smooth=smoothed_kl_term(instance.q, instance.beta),
        objective=labeling_objective(instance.q, instance.beta, instance.graph),
        h_prox=_simplex_prox,
        feasible=on_simplices,
        x0=instance.q,
        eta=eta,
        name=instance.name,
    )


def build_labeling_problem(instance: LabelingInstance, mode: str = "pfdr", eta: float = ETA,
                           reserve: float = PGFB_RESERVE) -> SplitProblem:
    return configure(labeling_ingredients(instance, eta), mode, reserve)


def build_labeling_ppd(instance: LabelingInstance) -> PrimalDualSplitting:
    return build_ppd_splitting_labeling(instance.graph, instance.q, instance.beta)


def select_uncertain_points(q, labels, per_class: int) -> np.ndarray:
    """For each class, the `per_class` vertices of that class whose prediction q has the
    highest entropy (ties to the lower index). Sorted vertex ids."""
    labels = np.asarray(labels).ravel()
    ent = entropy_uncertainty(q)
    picked = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        order = np.argsort(-ent[members], kind="stable")
        picked.append(members[order[:per_class]])
    return np.sort(np.concatenate(picked)) if picked else np.array([], dtype=np.int64)


def synth_labeling(seed: int, num_vertices: int, num_labels: int, flip_prob: float,
                   beta: float = DEFAULT_BETA, lambda_tv: float = 1.0,
                   per_class: Optional[int] = None) -> LabelingInstance:
    """Banded ground truth on a grid (|V| a perfect square) or a chain; q is the one-hot
    of the flipped labels mixed with the uniform distribution by ε_v ~ U[0.2, 0.8]."""
    if num_labels < 2:
        raise InvalidInputError("synthetic labeling needs K >= 2")
    if not 0.0 <= flip_prob <= 1.0:
        raise InvalidInputError("flip probability must lie in [0, 1]")
    if num_vertices < 1:
        raise InvalidInputError("need at least one vertex")
    rng = np.random.default_rng(seed)
    side = math.isqrt(num_vertices)
    if side * side == num_vertices and side > 1:
        graph = grid_graph(side, side, lambda_tv)
        column = np.arange(num_vertices) % side
        labels = column * num_labels // side
    else:
        graph = chain_graph(num_vertices, lambda_tv)
        labels = np.arange(num_vertices) * num_labels // num_vertices

    flipped = rng.random(num_vertices) < flip_prob
    shift = rng.integers(1, num_labels, size=num_vertices)
    noisy = np.where(flipped, (labels + shift) % num_labels, labels)
    eps = rng.uniform(0.2, 0.8, size=num_vertices)
    q = np.eye(num_labels)[noisy] * (1.0 - eps)[:, None] + (eps / num_labels)[:, None]

    if per_class is None:
        per_class = max(1, num_vertices // (10 * num_labels))
    train = select_uncertain_points(q, labels, per_class)
    return LabelingInstance(graph, q, beta, labels, train, name=f"labeling-synth-{seed}")
