# tests/test_layout.py
from __future__ import annotations

import numpy as np
import pytest

from config.errors import InvalidInputError, LayoutInfeasibleError
from graphs.graph import Graph, chain_graph
from graphs.layout import (
    BlockGroup,
    BlockLayout,
    SplitWeights,
    compute_weight_heuristic,
    edge_group,
    full_group,
    validate_split_weights,
    zero_group,
)
from operators.prox import prox_edge_blocks


def _edge_layout(graph, channels=1, full=False):
    groups = [edge_group(graph, channels, prox_edge_blocks)]
    if full:
        groups.append(full_group((graph.num_vertices, channels) if channels > 1 else (graph.num_vertices,),
                                 lambda v, m, p: v))
    return BlockLayout(graph.num_vertices * channels, tuple(groups))


def test_equal_lambdas_with_reserve_split_evenly():
    g = chain_graph(3)
    w = compute_weight_heuristic(g, _edge_layout(g, full=True), reserve=0.2)
    edges = w[0][..., 0]
    assert edges[0, 1] == pytest.approx(0.4)   # vertex 1 on edge (0, 1)
    assert edges[1, 0] == pytest.approx(0.4)   # vertex 1 on edge (1, 2)
    assert edges[0, 0] == pytest.approx(0.8)
    assert np.allclose(w[1], 0.2)


def test_single_edge_without_reserve_gets_unit_weights():
    g = Graph(2, [[0, 1]], [1.0])
    w = compute_weight_heuristic(g, _edge_layout(g), reserve=0.0)
    assert np.array_equal(w[0], np.ones((1, 2, 1)))


def test_weights_proportional_to_lambda():
    g = chain_graph(3, 1.0).with_weights([1.0, 3.0])
    w = compute_weight_heuristic(g, _edge_layout(g), reserve=0.0)
    assert w[0][0, 1, 0] == pytest.approx(0.25)
    assert w[0][1, 0, 0] == pytest.approx(0.75)


def test_heuristic_output_validates_with_channels():
    g = chain_graph(6).with_weights([0.5, 1.0, 2.0, 0.0, 4.0])
    layout = _edge_layout(g, channels=3, full=True)
    report = validate_split_weights(compute_weight_heuristic(g, layout, reserve=0.2), layout)
    assert report.passed, report.violations()
    assert report.max_deviation < 1e-12


def test_zero_lambda_edge_keeps_positive_weight():
    g = chain_graph(3).with_weights([0.0, 1.0])
    layout = _edge_layout(g)
    w = compute_weight_heuristic(g, layout)
    assert np.all(w[0] > 0)
    assert validate_split_weights(w, layout).passed


def test_all_zero_lambdas_fall_back_to_uniform_split(caplog):
    g = chain_graph(3, 0.0)
    w = compute_weight_heuristic(g, _edge_layout(g))
    assert w[0][0, 1, 0] == pytest.approx(0.5)
    assert w[0][1, 0, 0] == pytest.approx(0.5)
    assert "uniform" in caplog.text


def test_perturbed_weight_is_flagged():
    g = chain_graph(4)
    layout = _edge_layout(g)
    w = compute_weight_heuristic(g, layout)
    bad = w[0].copy()
    bad[0, 0, 0] += 1e-6
    report = validate_split_weights(SplitWeights((bad,)), layout)
    assert not report.passed
    assert report.flagged_coordinates.tolist() == [0]
    assert any(v.startswith("weight-sum") for v in report.violations())


def test_off_support_weight_is_a_support_violation():
    g = chain_graph(3)
    layout = _edge_layout(g)
    dense = compute_weight_heuristic(g, layout).expand(layout)
    first = dense[0].copy()
    first[0, 2] = 0.1   # edge (0, 1) writing on vertex 2
    report = validate_split_weights(SplitWeights((first,)), layout)
    assert not report.passed
    assert ("edges", 0) in report.support_violations
    assert any(v.startswith("weight-support") for v in report.violations())


def test_expanded_heuristic_weights_pass():
    g = chain_graph(5)
    layout = _edge_layout(g)
    dense = compute_weight_heuristic(g, layout).expand(layout)
    assert validate_split_weights(dense, layout).passed


def test_uncovered_coordinate_is_infeasible():
    g = Graph(3, [[0, 1]], [1.0])
    with pytest.raises(LayoutInfeasibleError):
        compute_weight_heuristic(g, _edge_layout(g))


def test_zero_block_covers_isolated_vertices():
    g = Graph(3, [[0, 1]], [1.0])
    layout = _edge_layout(g)
    layout = layout.with_group(zero_group(layout.uncovered()))
    w = compute_weight_heuristic(g, layout)
    assert np.array_equal(w[1], np.ones((1, 1)))
    assert validate_split_weights(w, layout).passed


def test_reserve_rules():
    g = chain_graph(3)
    with pytest.raises(InvalidInputError):
        compute_weight_heuristic(g, _edge_layout(g), reserve=0.2)
    with pytest.raises(LayoutInfeasibleError):
        compute_weight_heuristic(g, _edge_layout(g, full=True), reserve=0.0)
    with pytest.raises(InvalidInputError):
        compute_weight_heuristic(g, _edge_layout(g, full=True), reserve=1.0)


def test_layout_rejects_duplicate_coordinates_in_a_block():
    with pytest.raises(InvalidInputError):
        BlockLayout(3, (BlockGroup("bad", "custom", np.array([[0, 0]])),))
