# problems/functionals.py
"""Objective values shared by every solver configuration of the two problem families."""
from __future__ import annotations

from typing import Callable

import numpy as np

from graphs.graph import Graph
from operators.smooth import DenseOperator, smoothed_kl_value

# slack on the indicator terms of F, so that iterates produced by splittings that only
# reach the constraint set in the limit are scored instead of reported as +inf
FEASIBILITY_TOL = 1e-8
SIMPLEX_SUM_TOL = 1e-12


def graph_tv(graph: Graph, x: np.ndarray) -> float:
    """Σ_(u,v) λ_uv Σ_k |x_u,k - x_v,k| for x shaped (V,) or (V, K)."""
    if not graph.num_edges:
        return 0.0
    x = np.asarray(x, dtype=np.float64)
    d = np.abs(x[graph.edges[:, 0]] - x[graph.edges[:, 1]])
    if d.ndim > 1:
        d = d.sum(axis=1)
    return float(graph.edge_tv_weight @ d)


def is_nonnegative(x, tol: float = 0.0) -> bool:
    return bool(np.all(np.asarray(x) >= -tol))


def on_simplices(p, tol: float = 0.0, sum_tol: float = SIMPLEX_SUM_TOL) -> bool:
    """Every row (last axis) nonnegative within `tol` and summing to 1 within `sum_tol`."""
    p = np.asarray(p, dtype=np.float64)
    return bool(np.all(p >= -tol) and np.all(np.abs(p.sum(axis=-1) - 1.0) < sum_tol))


def eeg_objective(phi: DenseOperator, y, graph: Graph, lambda_l1) -> Callable[[np.ndarray], float]:
    """½‖y - Φx‖² + graph TV + Σ λ_v |x_v| + ι_{x >= 0}."""
    y = np.asarray(y, dtype=np.float64)
    l1 = np.asarray(lambda_l1, dtype=np.float64)

    def value(x: np.ndarray) -> float:
        if not is_nonnegative(x, FEASIBILITY_TOL):
            return float("inf")
        r = y - phi.apply(x)
        return 0.5 * float(r @ r) + graph_tv(graph, x) + float(np.sum(l1 * np.abs(x)))

    return value


def labeling_objective(q, beta: float, graph: Graph) -> Callable[[np.ndarray], float]:
    """Smoothed KL to q + graph TV + ι over the product of simplices."""
    q = np.asarray(q, dtype=np.float64)

    def value(p: np.ndarray) -> float:
        if not on_simplices(p, FEASIBILITY_TOL, FEASIBILITY_TOL):
            return float("inf")
        return smoothed_kl_value(p, q, beta) + graph_tv(graph, p)

    return value
