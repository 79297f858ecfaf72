# solvers/ppd.py
"""Diagonally preconditioned primal-dual iteration for F = g∘Λ + h (θ = 1).

    y  = prox_{σg*}(y + σ Λ x̄)
    x⁺ = prox_{τh}(x - τ Λ* y)
    x̄  = 2x⁺ - x
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from config.errors import HypothesisViolationError, InvalidInputError
from graphs.graph import Graph
from operators.prox import (
    clip_unit,
    conjugate_prox_squared_residual,
    project_simplex,
    prox_conjugate,
    prox_kl,
    prox_l1_positive,
)
from operators.smooth import DenseOperator, power_method_sqnorm
from problems.functionals import eeg_objective, labeling_objective, on_simplices
from solvers.convergence import ConvergenceLog, LogRecord
from solvers.pfdr import StopRule, evolution

logger = logging.getLogger(__name__)

SUM_FLOOR = 1e-12
NORM_SLACK = 1e-10

# dual_prox(w, sigma) = prox_{σ g*}(w) on the whole dual vector
DualProx = Callable[[np.ndarray, np.ndarray], np.ndarray]
# primal_prox(v, metric) = prox of h in the metric τ⁻¹, on the shaped iterate
PrimalProx = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class PrimalDualSplitting:
    shape: Tuple[int, ...]
    Lambda: sp.csr_matrix
    dual_prox: DualProx
    primal_prox: PrimalProx
    objective: Callable[[np.ndarray], float]
    feasible: Optional[Callable[[np.ndarray], bool]] = None
    name: str = "ppd"

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        lam = sp.csr_matrix(self.Lambda, dtype=np.float64)
        if lam.shape[1] != int(np.prod(self.shape)):
            raise InvalidInputError(
                f"Λ has {lam.shape[1]} columns for a primal variable of size {int(np.prod(self.shape))}")
        object.__setattr__(self, "Lambda", lam)

    @property
    def num_dual(self) -> int:
        return int(self.Lambda.shape[0])

    def adjoint_mismatch(self, samples: int = 5, seed: int = 0) -> float:
        """max |⟨Λx, u⟩ - ⟨x, Λ*u⟩| over seeded random pairs."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(samples):
            x = rng.standard_normal(self.Lambda.shape[1])
            u = rng.standard_normal(self.Lambda.shape[0])
            worst = max(worst, abs(float((self.Lambda @ x) @ u) - float(x @ (self.Lambda.T @ u))))
        return worst


@dataclass(frozen=True, eq=False)
class PDPreconditioners:
    tau: np.ndarray    # per primal coordinate
    sigma: np.ndarray  # per dual coordinate


def ppd_preconditioners(Lambda) -> PDPreconditioners:
    """τ_j = 1 / Σ_i |Λ_ij| and σ_i = 1 / Σ_j |Λ_ij|, zero sums floored at 1e-12."""
    a = abs(sp.csr_matrix(Lambda, dtype=np.float64))
    col = np.asarray(a.sum(axis=0)).ravel()
    row = np.asarray(a.sum(axis=1)).ravel()
    return PDPreconditioners(1.0 / np.maximum(col, SUM_FLOOR), 1.0 / np.maximum(row, SUM_FLOOR))


def ppd_norm_bound(Lambda, pre: PDPreconditioners, seed: int = 0) -> float:
    """Power-method estimate of ‖σ^½ Λ τ^½‖ (raw, without safety factor)."""
    lam = sp.csr_matrix(Lambda, dtype=np.float64)
    scaled = sp.diags(np.sqrt(pre.sigma)) @ lam @ sp.diags(np.sqrt(pre.tau))
    op = LinearOperator(scaled.shape, matvec=lambda v: scaled @ v, rmatvec=lambda v: scaled.T @ v,
                        dtype=np.float64)
    return float(np.sqrt(power_method_sqnorm(op, seed=seed).raw))


# ---------------- Builders ----------------
def weighted_incidence(graph: Graph, channels: int = 1) -> sp.csr_matrix:
    """Rows (e, k) ↦ λ_e (x_{u,k} - x_{v,k}), row index e*K + k, column index vertex*K + k."""
    e = np.arange(graph.num_edges)
    k = np.arange(channels)
    rows = (e[:, None] * channels + k[None, :]).ravel()
    cu = (graph.edges[:, 0][:, None] * channels + k[None, :]).ravel()
    cv = (graph.edges[:, 1][:, None] * channels + k[None, :]).ravel()
    lam = np.repeat(graph.edge_tv_weight, channels)
    data = np.concatenate([lam, -lam])
    return sp.csr_matrix((data, (np.concatenate([rows, rows]), np.concatenate([cu, cv]))),
                         shape=(graph.num_edges * channels, graph.num_vertices * channels))


def build_ppd_splitting_eeg(phi: DenseOperator, y, graph: Graph, lambda_l1) -> PrimalDualSplitting:
    """Λ = [Φ; λ-weighted incidence], g(v, δ) = ½‖y - v‖² + ‖δ‖₁, h = ℓ1 + positivity."""
    y = np.asarray(y, dtype=np.float64)
    l1 = np.asarray(lambda_l1, dtype=np.float64)
    n_obs, n_var = phi.shape
    if y.shape != (n_obs,) or graph.num_vertices != n_var or l1.shape not in ((), (n_var,)):
        raise InvalidInputError(
            f"dimension mismatch: Φ {n_obs}x{n_var}, y {y.shape}, |V|={graph.num_vertices}, λ_l1 {l1.shape}")
    Lambda = sp.vstack([sp.csr_matrix(phi.matrix), weighted_incidence(graph)], format="csr")

    def dual_prox(w, sigma):
        out = np.empty_like(w)
        out[:n_obs] = conjugate_prox_squared_residual(w[:n_obs], sigma[:n_obs], y)
        out[n_obs:] = clip_unit(w[n_obs:])
        return out

    return PrimalDualSplitting(
        (n_var,), Lambda, dual_prox,
        lambda v, metric: prox_l1_positive(v, l1, metric),
        eeg_objective(phi, y, graph, l1),
        feasible=lambda x: bool(np.all(x >= 0)),
        name="eeg/ppd",
    )


def build_ppd_splitting_labeling(graph: Graph, q, beta: float) -> PrimalDualSplitting:
    """Λ = [Id; λ-weighted channelwise incidence], g = smoothed KL + ‖δ‖₁, h = ι_simplices."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != graph.num_vertices:
        raise InvalidInputError(f"q must be shaped ({graph.num_vertices}, K), got {q.shape}")
    if not on_simplices(q, 0.0, 1e-9):
        raise InvalidInputError("q rows must lie on the simplex")
    V, K = q.shape
    n = V * K
    Lambda = sp.vstack([sp.identity(n, format="csr"), weighted_incidence(graph, K)], format="csr")

    def prox_data(u, metric):
        return prox_kl(u, q, beta, metric)

    def dual_prox(w, sigma):
        out = np.empty_like(w)
        out[:n] = prox_conjugate(prox_data, w[:n].reshape(V, K), sigma[:n].reshape(V, K)).ravel()
        out[n:] = clip_unit(w[n:])
        return out

    return PrimalDualSplitting(
        (V, K), Lambda, dual_prox,
        lambda v, metric: project_simplex(v, metric),
        labeling_objective(q, beta, graph),
        feasible=lambda p: on_simplices(p),
        name="labeling/ppd",
    )


# ---------------- Solve ----------------
@dataclass
class PPDConfig:
    stop: StopRule = field(default_factory=StopRule)
    max_iters: int = 10_000
    log_every: int = 1
    callback: Optional[Callable[[np.ndarray, LogRecord], None]] = None


class PPDResult(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    log: ConvergenceLog


def ppd_solve(splitting: PrimalDualSplitting, config: Optional[PPDConfig] = None,
              pre: Optional[PDPreconditioners] = None) -> PPDResult:
    """Primal and dual start at zero. fp_residual logs max(‖Δx‖_∞, ‖Δy‖_∞)."""
    config = config or PPDConfig()
    pre = pre or ppd_preconditioners(splitting.Lambda)
    bound = ppd_norm_bound(splitting.Lambda, pre)
    if bound > 1.0 + NORM_SLACK:
        raise HypothesisViolationError([f"PPD: ‖σ^1/2 Λ τ^1/2‖ = {bound:.12g} exceeds 1"])
    cap = config.stop.cap(config.max_iters)

    L, Lt = splitting.Lambda, splitting.Lambda.T.tocsr()
    shape = splitting.shape
    tau, sigma = pre.tau, pre.sigma
    inv_tau = (1.0 / tau).reshape(shape)
    x = np.zeros(L.shape[1])
    xbar = x.copy()
    y = np.zeros(L.shape[0])

    log = ConvergenceLog()

    def record(k, elapsed, rel, maxe, fp):
        xs = x.reshape(shape)
        exact = bool(splitting.feasible(xs)) if splitting.feasible is not None else None
        val = float(splitting.objective(xs))
        rec = LogRecord(k, elapsed, float("inf") if np.isnan(val) else val, rel, maxe, fp)
        log.append(rec, exact)
        if config.callback is not None:
            config.callback(xs, rec)

    record(0, 0.0, float("nan"), float("nan"), float("nan"))
    logger.info("%s: %d dual rows, ‖σ^1/2 Λ τ^1/2‖ ≈ %.6g, stop=%s, cap=%d",
                splitting.name, splitting.num_dual, bound, config.stop, cap)

    elapsed, reason, k = 0.0, "max-iters", 0
    while k < cap:
        k += 1
        t0 = time.perf_counter()
        y_new = splitting.dual_prox(y + sigma * (L @ xbar), sigma)
        x_new = np.asarray(splitting.primal_prox((x - tau * (Lt @ y_new)).reshape(shape), inv_tau),
                           dtype=np.float64).reshape(-1)
        xbar = 2.0 * x_new - x
        elapsed += time.perf_counter() - t0

        rel, maxe = evolution(x_new, x)
        dy = float(np.max(np.abs(y_new - y))) if y.size else 0.0
        x, y = x_new, y_new
        stop = config.stop.fired(rel, maxe)
        if stop or k == cap or k % config.log_every == 0:
            record(k, elapsed, rel, maxe, max(maxe, dy))
        if stop:
            reason = str(config.stop)
            break

    log.stop_reason = reason
    logger.info("%s: stopped (%s) after %d iterations", splitting.name, reason, k)
    return PPDResult(x.reshape(shape).copy(), y, log)
