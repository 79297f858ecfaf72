# metrics/evaluation.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import entr

from config.errors import InvalidInputError


def _support(x) -> np.ndarray:
    return np.asarray(x) != 0


def dice_score(x, xhat) -> float:
    """2|supp x ∩ supp x̂| / (|supp x| + |supp x̂|); 1 when both supports are empty."""
    a, b = _support(x), _support(xhat)
    if a.shape != b.shape:
        raise InvalidInputError(f"dice_score: shapes {a.shape} and {b.shape} differ")
    den = int(a.sum() + b.sum())
    if den == 0:
        return 1.0
    return 2.0 * int(np.sum(a & b)) / den


@dataclass(frozen=True)
class SupportSet:
    indices: np.ndarray
    threshold: float

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[self.indices] = True
        return m


LLOYD_MAX_ITERS = 100


def _lloyd_threshold(v: np.ndarray) -> float:
    """Lloyd's iteration from centers (min, max) until the assignment is stable."""
    low, high = float(v.min()), float(v.max())
    assign = None
    for _ in range(LLOYD_MAX_ITERS):
        upper = v > 0.5 * (low + high)
        if assign is not None and np.array_equal(upper, assign):
            break
        assign = upper
        low, high = float(v[~upper].mean()), float(v[upper].mean())
    return 0.5 * (low + high)


def _exact_threshold(s: np.ndarray) -> float:
    n = s.size
    csum, csq = np.cumsum(s), np.cumsum(s * s)
    left_n = np.arange(1, n)
    right_n = n - left_n
    left_sum, right_sum = csum[:-1], csum[-1] - csum[:-1]
    left_sq, right_sq = csq[:-1], csq[-1] - csq[:-1]
    cost = (left_sq - left_sum ** 2 / left_n) + (right_sq - right_sum ** 2 / right_n)
    # splits between equal values do not separate clusters
    cost[s[1:] == s[:-1]] = np.inf
    j = int(np.argmin(cost))
    return 0.5 * (left_sum[j] / left_n[j] + right_sum[j] / right_n[j])


def approx_support_2means(x, method: str = "exact") -> SupportSet:
    """Support {v : |x_v| > a}, a the midpoint of the two 1-D 2-means centers of |x|.

    "exact" takes the best of the n - 1 contiguous splits of the sorted values (the 1-D
    optimum, itself a fixed point of Lloyd's iteration). "lloyd" runs Lloyd's iteration
    from the min/max centers, capped at LLOYD_MAX_ITERS, and may stop at a worse split.
    """
    if method not in ("exact", "lloyd"):
        raise InvalidInputError(f"unknown 2-means method {method!r}")
    v = np.abs(np.asarray(x, dtype=np.float64).ravel())
    if v.size == 0:
        raise InvalidInputError("approx_support_2means needs a nonempty vector")
    if v.min() == v.max():
        return SupportSet(np.flatnonzero(v != 0), 0.0)
    a = _exact_threshold(np.sort(v)) if method == "exact" else _lloyd_threshold(v)
    return SupportSet(np.flatnonzero(v > a), float(a))


def avg_f1(labels, gt, subset=None, num_labels: Optional[int] = None) -> float:
    """Mean per-class F1 on `subset`; a class with zero denominator scores 0.

    Classes are 0..num_labels-1 when given, else every label present in gt ∪ labels
    on the subset.
    """
    labels = np.asarray(labels).ravel()
    gt = np.asarray(gt).ravel()
    if labels.shape != gt.shape:
        raise InvalidInputError("avg_f1: labels and ground truth differ in length")
    idx = np.arange(gt.size) if subset is None else np.asarray(subset, dtype=np.int64).ravel()
    if idx.size == 0:
        raise InvalidInputError("avg_f1: empty evaluation subset")
    pred, true = labels[idx], gt[idx]
    classes = np.arange(num_labels) if num_labels is not None else np.union1d(pred, true)

    scores = []
    for c in classes:
        tp = int(np.sum((pred == c) & (true == c)))
        den = int(np.sum(pred == c) + np.sum(true == c))
        scores.append(2.0 * tp / den if den else 0.0)
    return float(np.mean(scores))


def argmax_labels(p) -> np.ndarray:
    """Per-vertex argmax over the last axis; ties go to the smallest label."""
    return np.argmax(np.asarray(p), axis=-1)


def entropy_uncertainty(q) -> np.ndarray:
    """-Σ_k q_k log q_k per row (natural log, 0 log 0 = 0)."""
    return entr(np.asarray(q, dtype=np.float64)).sum(axis=-1)
