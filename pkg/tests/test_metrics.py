# tests/test_metrics.py
from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from config.errors import InvalidInputError
from metrics.evaluation import (
    approx_support_2means,
    argmax_labels,
    avg_f1,
    dice_score,
    entropy_uncertainty,
)


def test_dice_examples():
    x = np.array([0, 1, 2, 0, 3])
    assert dice_score(x, x) == 1.0
    assert dice_score([1, 0, 0], [0, 1, 1]) == 0.0
    a = np.array([1, 1, 1, 1, 0, 0, 0])
    b = np.array([0, 1, 1, 1, 1, 1, 1])
    assert dice_score(a, b) == pytest.approx(0.6)


def test_dice_empty_supports_agree():
    assert dice_score(np.zeros(4), np.zeros(4)) == 1.0
    with pytest.raises(InvalidInputError):
        dice_score(np.zeros(3), np.zeros(4))


@pytest.mark.parametrize("values, expected", [
    ([0.0, 0.0, 5.0, 5.0], [2, 3]),
    ([0.01, 0.02, 3.0, 4.0], [2, 3]),
    ([-4.0, 0.1, 0.0, 3.0], [0, 3]),
])
def test_two_means_support_examples(values, expected):
    assert approx_support_2means(values).indices.tolist() == expected


@pytest.mark.parametrize("values, expected", [
    ([0.0, 0.0, 5.0, 5.0], [2, 3]),
    ([0.01, 0.02, 3.0, 4.0], [2, 3]),
    ([-4.0, 0.1, 0.0, 3.0], [0, 3]),
])
def test_lloyd_two_means_examples(values, expected):
    assert approx_support_2means(values, method="lloyd").indices.tolist() == expected


def _split_cost(v: np.ndarray, a: float) -> float:
    hi = v > a
    return float(np.sum((v[hi] - v[hi].mean()) ** 2) + np.sum((v[~hi] - v[~hi].mean()) ** 2))


def test_lloyd_never_beats_the_exact_split():
    rng = np.random.default_rng(3)
    for _ in range(50):
        v = np.abs(rng.standard_normal(12)) * rng.choice([0.1, 1.0, 5.0], size=12)
        exact = approx_support_2means(v).threshold
        lloyd = approx_support_2means(v, method="lloyd").threshold
        assert _split_cost(v, exact) <= _split_cost(v, lloyd) + 1e-12
    with pytest.raises(InvalidInputError):
        approx_support_2means([1.0, 2.0], method="kmeans++")


def test_two_means_degenerate_inputs():
    zeros = approx_support_2means(np.zeros(5))
    assert zeros.indices.size == 0 and zeros.threshold == 0.0
    const = approx_support_2means(np.full(3, 2.0))
    assert const.indices.tolist() == [0, 1, 2]
    with pytest.raises(InvalidInputError):
        approx_support_2means([])


def _brute_two_means(v: np.ndarray) -> float:
    """Best threshold over every nonempty proper subset (exhaustive, not just contiguous)."""
    best, best_a = np.inf, None
    n = v.size
    for mask in itertools.product([False, True], repeat=n):
        m = np.array(mask)
        if m.all() or not m.any():
            continue
        lo, hi = v[~m], v[m]
        cost = np.sum((lo - lo.mean()) ** 2) + np.sum((hi - hi.mean()) ** 2)
        if cost < best - 1e-12 and hi.min() > lo.max():
            best, best_a = cost, 0.5 * (lo.mean() + hi.mean())
    return best_a


def test_two_means_matches_exhaustive_search():
    rng = np.random.default_rng(0)
    for n in range(2, 11):
        v = np.abs(rng.standard_normal(n)) * rng.choice([0.1, 1.0, 5.0], size=n)
        got = approx_support_2means(v)
        assert got.threshold == pytest.approx(_brute_two_means(v), rel=1e-12)
        assert np.array_equal(got.mask(n), v > got.threshold)


def test_avg_f1_examples():
    assert avg_f1([0, 1, 2, 1], [0, 1, 2, 1]) == 1.0
    assert avg_f1([1, 1, 1, 1], [1, 1, 2, 2]) == pytest.approx(1 / 3)
    assert avg_f1([0, 1], [0, 0], subset=[0], num_labels=2) == pytest.approx(0.5)


def test_avg_f1_bounds_and_errors():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, b = rng.integers(0, 3, 30), rng.integers(0, 3, 30)
        assert 0.0 <= avg_f1(a, b, num_labels=3) <= 1.0
    with pytest.raises(InvalidInputError):
        avg_f1([0, 1], [0, 1], subset=[])
    with pytest.raises(InvalidInputError):
        avg_f1([0, 1], [0, 1, 1])


def test_argmax_labels_examples():
    assert argmax_labels(np.eye(3)[[2, 0, 1]]).tolist() == [2, 0, 1]
    assert argmax_labels(np.full((1, 3), 1 / 3)).tolist() == [0]
    assert argmax_labels(np.array([[0.2, 0.5, 0.3]])).tolist() == [1]


def test_entropy_examples():
    q = np.array([[1.0, 0.0, 0.0], [1 / 3, 1 / 3, 1 / 3]])
    assert entropy_uncertainty(q) == pytest.approx([0.0, math.log(3)])
    assert entropy_uncertainty(np.array([[0.9, 0.1]]))[0] == pytest.approx(0.3251, abs=1e-4)
