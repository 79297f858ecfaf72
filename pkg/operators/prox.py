"""Closed-form proximity operators in diagonal metrics.

Every operator here solves, coordinatewise or blockwise,
    argmin_p  Σ_j ½ m_j (x_j - p_j)² + g(p)
for a per-coordinate positive metric m. Arrays broadcast; the last axis is the
channel axis where an operator couples channels (simplex projection).
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from config.errors import InvalidInputError

ProxFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _as_float(*arrays):
    return [np.asarray(a, dtype=np.float64) for a in arrays]


def soft_threshold(x, tau, metric=1.0) -> np.ndarray:
    """Prox of Σ tau_j |p_j|: sign(x) * max(|x| - tau/m, 0)."""
    x, tau, metric = _as_float(x, tau, metric)
    return np.sign(x) * np.maximum(np.abs(x) - tau / metric, 0.0)


def prox_l1_positive(x, tau, metric=1.0) -> np.ndarray:
    """Prox of Σ tau_j |p_j| + ι_{p >= 0}: max(x - tau/m, 0)."""
    x, tau, metric = _as_float(x, tau, metric)
    return np.maximum(x - tau / metric, 0.0)


def project_simplex(p, metric=1.0) -> np.ndarray:
    """Projection of each row (last axis) onto the unit simplex in the metric diag(m).

    q_k = max(p_k - mu / m_k, 0) with mu such that Σ q_k = 1. The breakpoints
    t_k = m_k p_k are sorted decreasingly; the active set is the longest prefix whose
    candidate mu stays below its last breakpoint.
    """
    p, metric = _as_float(p, metric)
    if p.ndim == 0 or p.shape[-1] == 0:
        raise InvalidInputError("simplex projection needs K >= 1")
    metric = np.broadcast_to(metric, p.shape)
    if np.any(metric <= 0):
        raise InvalidInputError("metric must be strictly positive")

    t = metric * p
    order = np.argsort(-t, axis=-1, kind="stable")
    t_s = np.take_along_axis(t, order, axis=-1)
    p_s = np.take_along_axis(p, order, axis=-1)
    inv_s = np.take_along_axis(1.0 / metric, order, axis=-1)
    mu_j = (np.cumsum(p_s, axis=-1) - 1.0) / np.cumsum(inv_s, axis=-1)
    active = np.sum(t_s > mu_j, axis=-1, keepdims=True)
    active = np.maximum(active, 1)
    mu = np.take_along_axis(mu_j, active - 1, axis=-1)
    return np.maximum(p - mu / metric, 0.0)


def prox_pair_abs_diff(a, b, lam, metric_a=1.0, metric_b=1.0):
    """Exact prox of lam * |p - q| for the pair (a, b) in metric diag(m_a, m_b).

    Collapses both ends to the metric-weighted mean when lam is at least
    |a - b| * m_a m_b / (m_a + m_b); otherwise each end moves by lam / m toward the other.
    """
    a, b, lam, ma, mb = _as_float(a, b, lam, metric_a, metric_b)
    d = a - b
    collapse = lam * (ma + mb) >= np.abs(d) * ma * mb
    mean = (ma * a + mb * b) / (ma + mb)
    s = np.sign(d)
    p = np.where(collapse, mean, a - s * lam / ma)
    q = np.where(collapse, mean, b + s * lam / mb)
    return p, q


def prox_edge_blocks(v, metric, lam):
    """Vectorized pairwise TV prox over edge blocks shaped (E, 2, K)."""
    lam = np.asarray(lam, dtype=np.float64)[:, None]
    p, q = prox_pair_abs_diff(v[:, 0, :], v[:, 1, :], lam, metric[:, 0, :], metric[:, 1, :])
    return np.stack([p, q], axis=1)


def _check_beta(beta: float):
    if not 0.0 <= beta <= 1.0:
        raise InvalidInputError(f"beta must lie in [0, 1], got {beta}")


def prox_kl(p0, q, beta: float, metric=1.0) -> np.ndarray:
    """Prox of p ↦ -Σ_k r_k log(β/|K| + (1-β) p_k), r = β/|K| + (1-β) q.

    |K| is the size of the last axis. Stationarity in s = β/|K| + (1-β) p gives
    m s² - m b s - r (1-β)² = 0 with b = β/|K| + (1-β) p0; the larger root is the only
    one keeping s > 0. β = 0 (pure KL) is accepted.
    """
    _check_beta(beta)
    p0, q, metric = _as_float(p0, q, metric)
    if beta == 1.0:
        return p0.copy()
    k = p0.shape[-1] if p0.ndim else 1
    c = beta / k
    r = c + (1.0 - beta) * q
    b = c + (1.0 - beta) * p0
    e = r * (1.0 - beta) ** 2 / metric
    disc = np.sqrt(np.maximum(b * b + 4.0 * e, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        # two algebraically equal forms, picked to avoid cancellation
        s = np.where(b >= 0, 0.5 * (b + disc), 2.0 * e / (disc - b))
    s = np.where(e == 0, b, s)
    return (s - c) / (1.0 - beta)


def prox_conjugate(prox_of_g: ProxFn, x, sigma) -> np.ndarray:
    """Prox of g* with per-coordinate step sigma, via the diagonal Moreau identity.

    `prox_of_g(v, metric)` must be the exact prox of g in metric diag(metric).
    Returns x - sigma * prox_of_g(x / sigma, sigma).
    """
    x, sigma = _as_float(x, sigma)
    sigma = np.broadcast_to(sigma, x.shape)
    return x - sigma * prox_of_g(x / sigma, sigma)


def clip_unit(x, sigma=None) -> np.ndarray:
    """Conjugate prox of |·|: projection onto [-1, 1] (independent of the step)."""
    return np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)


def conjugate_prox_squared_residual(w, sigma, y) -> np.ndarray:
    """Prox of σ g* for g(v) = ½‖y - v‖²: (w - σ y) / (1 + σ)."""
    w, sigma, y = _as_float(w, sigma, y)
    return (w - sigma * y) / (1.0 + sigma)
