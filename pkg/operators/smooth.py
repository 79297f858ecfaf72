"""Smooth terms f: gradients, values, and cocoercivity (curvature) bounds."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import aslinearoperator

from config import env_loader
from config.errors import DomainViolationError, InvalidInputError
from graphs.layout import DiagonalOperator

logger = logging.getLogger(__name__)

POWER_TOL = env_loader.get_float("PFDR_POWER_TOL", 1e-9)
POWER_MAX_ITERS = env_loader.get_int("PFDR_POWER_MAX_ITERS", 10_000)
POWER_SAFETY = env_loader.get_float("PFDR_POWER_SAFETY", 1.01)
JACOBI_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """N x |V| matrix Φ with application and adjoint application."""
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64, ndmin=2)
        if not np.all(np.isfinite(m)):
            raise InvalidInputError("operator has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return self.matrix.T @ y


@dataclass(frozen=True, eq=False)
class SmoothTerm:
    """f with its gradient B = ∇f and a diagonal L satisfying the cocoercivity bound.

    `exact_curvature` is False when L is a heuristic (Jacobi preconditioning): the
    step-bound guard then only holds if the Hessian is diagonal.
    """
    gradient: Callable[[np.ndarray], np.ndarray]
    value: Callable[[np.ndarray], float]
    curvature: DiagonalOperator
    in_domain: Callable[[np.ndarray], bool] = lambda x: True
    is_zero: bool = False
    exact_curvature: bool = True


@dataclass(frozen=True)
class PowerEstimate:
    value: float       # safety-scaled upper estimate of ‖A‖²
    raw: float         # last Rayleigh quotient of A*A
    iterations: int
    converged: bool


# ---------------- Least squares ----------------
def grad_least_squares(x, phi: DenseOperator, y) -> np.ndarray:
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    n_obs, n_var = phi.shape
    if x.shape[0] != n_var or y.shape[0] != n_obs:
        raise InvalidInputError(
            f"dimension mismatch: Φ is {n_obs}x{n_var}, x has {x.shape[0]}, y has {y.shape[0]}")
    return phi.adjoint(phi.apply(x) - y)


def jacobi_diag(phi: DenseOperator) -> DiagonalOperator:
    """diag(Φ*Φ), the squared column norms (zero columns give zero entries)."""
    return DiagonalOperator(np.einsum("ij,ij->j", phi.matrix, phi.matrix))


def floored_jacobi(phi: DenseOperator) -> DiagonalOperator:
    h = jacobi_diag(phi).values
    top = h.max() if h.size else 0.0
    return DiagonalOperator(np.maximum(h, JACOBI_FLOOR * top if top > 0 else JACOBI_FLOOR))


def power_method_sqnorm(op, tol: float = POWER_TOL, max_iters: int = POWER_MAX_ITERS,
                        seed: int = 0, safety: float = POWER_SAFETY) -> PowerEstimate:
    """Estimate ‖A‖² by power iteration on A*A from a seeded start vector.

    `op` is a DenseOperator, a numpy/scipy matrix or a scipy LinearOperator. The raw
    Rayleigh quotient is a lower bound, hence the safety factor on `value`.
    """
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    A = aslinearoperator(op.matrix if isinstance(op, DenseOperator) else op)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[1])
    x /= np.linalg.norm(x)

    rq_old = 0.0
    for it in range(1, max_iters + 1):
        y = A.rmatvec(A.matvec(x))
        rq = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return PowerEstimate(0.0, 0.0, it, True)
        x = y / ny
        if abs(rq - rq_old) < tol * abs(rq):
            logger.info("power method converged in %d iterations: %.6g", it, rq)
            return PowerEstimate(safety * rq, rq, it, True)
        rq_old = rq
    logger.warning("power method hit max_iters=%d; returning best estimate %.6g", max_iters, rq_old)
    return PowerEstimate(safety * rq_old, rq_old, max_iters, False)


def least_squares_term(phi: DenseOperator, y, curvature: Optional[DiagonalOperator] = None,
                       ell: Optional[float] = None) -> SmoothTerm:
    """f(x) = ½‖y - Φx‖², with L = ℓ Id (ℓ from the power method) unless given."""
    y = np.asarray(y, dtype=np.float64)
    exact = curvature is None
    if curvature is None:
        if ell is None:
            ell = power_method_sqnorm(phi).value
        curvature = DiagonalOperator(np.full(phi.shape[1], float(ell)))

    def value(x):
        r = y - phi.apply(x)
        return 0.5 * float(r @ r)

    return SmoothTerm(lambda x: grad_least_squares(x, phi, y), value, curvature,
                      exact_curvature=exact)


# ---------------- Smoothed Kullback-Leibler ----------------
def _kl_parts(q, beta: float):
    if not 0.0 <= beta <= 1.0:
        raise InvalidInputError(f"beta must lie in [0, 1], got {beta}")
    q = np.asarray(q, dtype=np.float64)
    c = beta / q.shape[-1]
    return q, c, c + (1.0 - beta) * q


def grad_smoothed_kl(p, q, beta: float) -> np.ndarray:
    """-(1-β) r / (β/|K| + (1-β) p), raising DomainViolationError off the log domain."""
    q, c, r = _kl_parts(q, beta)
    s = c + (1.0 - beta) * np.asarray(p, dtype=np.float64)
    if beta < 1.0 and np.any(s <= 0):
        raise DomainViolationError(
            f"smoothed KL undefined: {int(np.sum(s <= 0))} log arguments are nonpositive")
    return -(1.0 - beta) * r / s


def smoothed_kl_value(p, q, beta: float) -> float:
    """Σ_v KL(βu + (1-β)q_v, βu + (1-β)p_v); +inf off the log domain."""
    q, c, r = _kl_parts(q, beta)
    s = c + (1.0 - beta) * np.asarray(p, dtype=np.float64)
    if np.any(s <= 0):
        return float("inf")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(r > 0, r * np.log(r / s), 0.0)
    return float(terms.sum())


def kl_curvature_diag(q, beta: float) -> DiagonalOperator:
    """(1-β)² (β/|K| + (1-β) q) / (β/|K|)²."""
    if not 0.0 < beta < 1.0:
        raise InvalidInputError(f"KL curvature needs beta in (0, 1), got {beta}")
    q, c, r = _kl_parts(q, beta)
    return DiagonalOperator((1.0 - beta) ** 2 * r / c ** 2)


def smoothed_kl_term(q, beta: float) -> SmoothTerm:
    q = np.asarray(q, dtype=np.float64)
    c = beta / q.shape[-1]
    return SmoothTerm(
        lambda p: grad_smoothed_kl(p, q, beta),
        lambda p: smoothed_kl_value(p, q, beta),
        kl_curvature_diag(q, beta),
        in_domain=lambda p: bool(np.all(c + (1.0 - beta) * p > 0)),
    )


def zero_term(shape) -> SmoothTerm:
    """f = 0: B = 0 is cocoercive for any L, so the step-bound norm is taken as 0."""
    return SmoothTerm(lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
                      lambda x: 0.0, DiagonalOperator(np.zeros(shape)), is_zero=True)


def quadratic_term(target, weight=1.0) -> SmoothTerm:
    """f(x) = ½ Σ w_j (x_j - t_j)²: separable, L = w exactly."""
    target = np.asarray(target, dtype=np.float64)
    w = np.broadcast_to(np.asarray(weight, dtype=np.float64), target.shape).copy()
    return SmoothTerm(lambda x: w * (x - target),
                      lambda x: 0.5 * float(np.sum(w * (x - target) ** 2)),
                      DiagonalOperator(w))
