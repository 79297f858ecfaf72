# tests/test_smooth.py
from __future__ import annotations

import numpy as np
import pytest

from config.errors import DomainViolationError, InvalidInputError
from operators.smooth import (
    DenseOperator,
    floored_jacobi,
    grad_least_squares,
    grad_smoothed_kl,
    jacobi_diag,
    kl_curvature_diag,
    least_squares_term,
    power_method_sqnorm,
    smoothed_kl_term,
    smoothed_kl_value,
)
from oracle.brute import fd_gradient
from problems.eeg import build_eeg_problem
from problems.functionals import graph_tv
from problems.labeling import build_labeling_problem
from solvers.problem import eval_objective


def _with_singular_values(s, rows=7, seed=0):
    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.standard_normal((rows, len(s))))
    v, _ = np.linalg.qr(rng.standard_normal((len(s), len(s))))
    return u @ np.diag(s) @ v.T


# ---------------- Least squares ----------------
def test_least_squares_gradient_example():
    g = grad_least_squares(np.zeros(2), DenseOperator([[1.0, 1.0]]), np.array([1.0]))
    assert g.tolist() == [-1.0, -1.0]


def test_least_squares_gradient_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        grad_least_squares(np.zeros(3), DenseOperator([[1.0, 1.0]]), np.array([1.0]))


def test_least_squares_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    phi = DenseOperator(rng.standard_normal((6, 4)))
    y, x = rng.standard_normal(6), rng.standard_normal(4)
    f = lambda v: 0.5 * float(np.sum((y - phi.apply(v)) ** 2))
    assert np.allclose(grad_least_squares(x, phi, y), fd_gradient(f, x), rtol=1e-6, atol=1e-8)


def test_jacobi_diagonal_is_squared_column_norms():
    assert jacobi_diag(DenseOperator([[1.0, 2.0], [0.0, 1.0]])).values.tolist() == [1.0, 5.0]


def test_floored_jacobi_keeps_zero_columns_positive():
    h = floored_jacobi(DenseOperator([[1.0, 0.0], [2.0, 0.0]])).values
    assert h[0] == pytest.approx(5.0)
    assert 0 < h[1] < 1e-10


def test_non_finite_operator_rejected():
    with pytest.raises(InvalidInputError):
        DenseOperator([[1.0, np.inf]])


# ---------------- Power method ----------------
def test_power_method_diagonal():
    est = power_method_sqnorm(DenseOperator(np.diag([1.0, 2.0, 3.0])))
    assert est.converged
    assert est.raw == pytest.approx(9.0, rel=1e-6)
    assert est.value == pytest.approx(9.09, rel=1e-6)


def test_power_method_identity():
    est = power_method_sqnorm(DenseOperator(np.eye(4)))
    assert est.raw == pytest.approx(1.0)
    assert est.value == pytest.approx(1.01)


def test_power_method_matches_svd_and_bounds_it():
    phi = _with_singular_values([3.0, 2.0, 1.5, 1.0, 0.5])
    true = np.linalg.svd(phi, compute_uv=False)[0] ** 2
    est = power_method_sqnorm(DenseOperator(phi))
    assert abs(est.raw - true) <= 1e-6 * true
    assert est.raw <= true * (1 + 1e-12)
    assert est.value >= true


def test_power_method_iteration_cap_reports_not_converged():
    est = power_method_sqnorm(DenseOperator(_with_singular_values([3.0, 2.9, 1.0])), max_iters=1)
    assert not est.converged
    assert est.iterations == 1
    assert est.raw > 0


def test_power_method_zero_operator():
    assert power_method_sqnorm(DenseOperator(np.zeros((2, 3)))).value == 0.0


def test_least_squares_term_is_cocoercive_with_power_bound():
    rng = np.random.default_rng(1)
    phi = DenseOperator(rng.standard_normal((5, 4)))
    term = least_squares_term(phi, rng.standard_normal(5))
    assert term.exact_curvature
    for _ in range(50):
        x, y = rng.standard_normal(4), rng.standard_normal(4)
        d = term.gradient(x) - term.gradient(y)
        assert np.sum(d * (x - y)) >= np.sum(d * d / term.curvature.values) - 1e-10


def test_least_squares_term_with_given_curvature_is_heuristic():
    phi = DenseOperator(np.eye(2))
    assert not least_squares_term(phi, np.zeros(2), curvature=jacobi_diag(phi)).exact_curvature


# ---------------- Smoothed KL ----------------
def test_kl_gradient_at_q():
    q = np.array([[0.2, 0.3, 0.5], [1.0, 0.0, 0.0]])
    assert np.allclose(grad_smoothed_kl(q, q, 0.1), -0.9)


def test_kl_gradient_vanishes_at_beta_one():
    q = np.array([0.2, 0.8])
    assert np.allclose(grad_smoothed_kl(np.array([0.7, 0.3]), q, 1.0), 0.0)


def test_kl_gradient_example():
    g = grad_smoothed_kl(np.array([0.5, 0.5]), np.array([1.0, 0.0]), 0.1)
    assert g == pytest.approx([-1.71, -0.09])


def test_kl_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    q = rng.dirichlet(np.ones(3), size=4)
    p = rng.uniform(0.1, 1.0, size=(4, 3))
    f = lambda v: smoothed_kl_value(v, q, 0.3)
    assert np.allclose(grad_smoothed_kl(p, q, 0.3), fd_gradient(f, p), rtol=1e-6, atol=1e-8)


def test_kl_curvature_example():
    assert kl_curvature_diag(np.array([1.0, 0.0]), 0.5).values == pytest.approx([3.0, 1.0])


def test_kl_curvature_needs_smoothing():
    with pytest.raises(InvalidInputError):
        kl_curvature_diag(np.array([0.5, 0.5]), 0.0)


def test_kl_outside_log_domain():
    q, p = np.array([0.5, 0.5]), np.array([-1.0, 1.0])
    with pytest.raises(DomainViolationError):
        grad_smoothed_kl(p, q, 0.1)
    assert smoothed_kl_value(p, q, 0.1) == float("inf")
    assert not smoothed_kl_term(q, 0.1).in_domain(p)


def test_kl_is_cocoercive_with_diagonal_curvature():
    rng = np.random.default_rng(3)
    for _ in range(50):
        q = rng.dirichlet(np.ones(3), size=2)
        term = smoothed_kl_term(q, rng.uniform(0.05, 0.95))
        x, y = rng.uniform(0, 1.5, (2, 3)), rng.uniform(0, 1.5, (2, 3))
        d = term.gradient(x) - term.gradient(y)
        assert np.sum(d * (x - y)) >= np.sum(d * d / term.curvature.values) - 1e-10


# ---------------- Objectives ----------------
def test_eeg_objective_at_zero_is_half_squared_data(small_eeg):
    problem = build_eeg_problem(small_eeg)
    assert eval_objective(problem, np.zeros(12)) == pytest.approx(0.5 * float(small_eeg.y @ small_eeg.y))


def test_eeg_objective_infinite_when_negative(small_eeg):
    x = np.zeros(12)
    x[3] = -1e-3
    assert eval_objective(build_eeg_problem(small_eeg), x) == float("inf")


def test_labeling_objective_at_q_is_tv_only(small_labeling):
    problem = build_labeling_problem(small_labeling)
    expected = graph_tv(small_labeling.graph, small_labeling.q)
    assert eval_objective(problem, small_labeling.q) == pytest.approx(expected, abs=1e-12)


def test_labeling_objective_infinite_off_simplex(small_labeling):
    p = small_labeling.q.copy()
    p[0] *= 1.5
    assert eval_objective(build_labeling_problem(small_labeling), p) == float("inf")
