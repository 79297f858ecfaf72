# tests/test_ppd.py
from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from config.errors import HypothesisViolationError
from graphs.graph import Graph
from operators.prox import conjugate_prox_squared_residual, soft_threshold
from problems.eeg import build_eeg_ppd
from problems.labeling import build_labeling_ppd
from solvers.pfdr import StopRule
from solvers.ppd import (
    PDPreconditioners,
    PPDConfig,
    PrimalDualSplitting,
    build_ppd_splitting_labeling,
    ppd_norm_bound,
    ppd_preconditioners,
    ppd_solve,
    weighted_incidence,
)


def _lasso_1d() -> PrimalDualSplitting:
    """min ½(x - 2)² + |x| written as g(Λx) + h(x) with Λ = [1]."""
    return PrimalDualSplitting(
        (1,), sp.csr_matrix([[1.0]]),
        lambda w, sigma: conjugate_prox_squared_residual(w, sigma, 2.0),
        lambda v, metric: soft_threshold(v, 1.0, metric),
        lambda x: 0.5 * float((x[0] - 2.0) ** 2) + abs(float(x[0])),
        name="lasso-1d/ppd",
    )


def test_preconditioner_example():
    pre = ppd_preconditioners([[1.0, -2.0], [0.0, 3.0]])
    assert pre.tau == pytest.approx([1.0, 0.2])
    assert pre.sigma == pytest.approx([1 / 3, 1 / 3])


def test_zero_rows_and_columns_are_floored():
    pre = ppd_preconditioners([[0.0, 0.0], [1.0, 0.0]])
    assert pre.sigma[0] == pytest.approx(1e12)
    assert pre.tau[1] == pytest.approx(1e12)
    assert np.all(np.isfinite(pre.tau)) and np.all(np.isfinite(pre.sigma))


def test_norm_bound_holds_for_random_operators():
    rng = np.random.default_rng(0)
    for _ in range(20):
        lam = rng.standard_normal((6, 4)) * (rng.random((6, 4)) < 0.6)
        assert ppd_norm_bound(lam, ppd_preconditioners(lam)) <= 1.0 + 1e-10


def test_single_edge_operator_has_unit_norm():
    lam = weighted_incidence(Graph(2, [[0, 1]], [2.0]))
    assert lam.toarray().tolist() == [[2.0, -2.0]]
    pre = ppd_preconditioners(lam)
    assert pre.tau == pytest.approx([0.5, 0.5])
    assert pre.sigma == pytest.approx([0.25])
    assert ppd_norm_bound(lam, pre) == pytest.approx(1.0, rel=1e-9)


def test_incidence_is_channelwise(small_labeling):
    lam = weighted_incidence(small_labeling.graph, 3)
    assert lam.shape == (3 * small_labeling.graph.num_edges, 3 * 16)
    assert np.allclose(lam @ np.ones(48), 0.0)


def test_adjoint_is_consistent(small_eeg, small_labeling):
    assert build_eeg_ppd(small_eeg).adjoint_mismatch() < 1e-12
    assert build_labeling_ppd(small_labeling).adjoint_mismatch() < 1e-12


def test_separable_eeg_without_tv(separable_eeg):
    result = ppd_solve(build_eeg_ppd(separable_eeg),
                       PPDConfig(stop=StopRule("rel-evol", 1e-13), max_iters=20_000))
    assert np.allclose(result.x, np.maximum(separable_eeg.y - 0.1, 0.0), atol=1e-6)


def test_scalar_lasso_converges_to_one():
    result = ppd_solve(_lasso_1d(), PPDConfig(stop=StopRule("rel-evol", 1e-13), max_iters=10_000))
    assert result.x[0] == pytest.approx(1.0, abs=1e-6)


def test_zero_iterations_return_the_zero_start(small_eeg):
    result = ppd_solve(build_eeg_ppd(small_eeg), PPDConfig(stop=StopRule("iters", 0)))
    assert np.array_equal(result.x, np.zeros(12))
    assert len(result.log) == 1
    assert result.log.final.objective == pytest.approx(0.5 * float(small_eeg.y @ small_eeg.y))


def test_oversized_steps_are_refused():
    with pytest.raises(HypothesisViolationError):
        ppd_solve(_lasso_1d(), pre=PDPreconditioners(np.array([2.0]), np.array([2.0])))


def test_isolated_vertex_labeling_returns_q():
    q = np.array([[0.7, 0.3]])
    splitting = build_ppd_splitting_labeling(Graph(1, np.zeros((0, 2), dtype=np.int64), np.zeros(0)), q, 0.1)
    result = ppd_solve(splitting, PPDConfig(stop=StopRule("rel-evol", 1e-13), max_iters=20_000))
    assert np.allclose(result.x, q, atol=1e-6)


def test_primal_iterates_feasible_after_first_step(small_eeg, small_labeling):
    for splitting in (build_eeg_ppd(small_eeg), build_labeling_ppd(small_labeling)):
        log = ppd_solve(splitting, PPDConfig(stop=StopRule("iters", 50))).log
        assert all(log.constraint_exact[1:])


def test_residual_column_covers_both_variables(small_eeg):
    log = ppd_solve(build_eeg_ppd(small_eeg), PPDConfig(stop=StopRule("iters", 20))).log
    fp, maxe = log.column("fp_residual")[1:], log.column("max_evol")[1:]
    assert np.all(fp >= maxe)


def test_callback_and_log_every(small_eeg):
    seen = []
    log = ppd_solve(build_eeg_ppd(small_eeg),
                    PPDConfig(stop=StopRule("iters", 25), log_every=10,
                              callback=lambda x, rec: seen.append(rec.iteration))).log
    assert seen == [0, 10, 20, 25] == log.column("iter").tolist()
