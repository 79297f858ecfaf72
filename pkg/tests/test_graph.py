# tests/test_graph.py
from __future__ import annotations

import numpy as np
import pytest

from config.errors import InvalidInputError
from graphs.graph import Graph, build_knn_graph, chain_graph, grid_graph


def test_knn_two_points_single_edge():
    g = build_knn_graph([[0.0], [1.0]], k=1)
    assert g.edges.tolist() == [[0, 1]]


def test_knn_collinear_tie_goes_to_lower_index_then_symmetrized():
    g = build_knn_graph([0.0, 1.0, 2.0], k=1)
    assert g.edges.tolist() == [[0, 1], [1, 2]]


def test_knn_k_n_minus_one_is_complete():
    pts = np.random.default_rng(0).standard_normal((5, 3))
    g = build_knn_graph(pts, k=4)
    assert g.num_edges == 10
    assert np.all(g.edges[:, 0] < g.edges[:, 1])


def test_knn_deterministic_and_every_vertex_connected():
    pts = np.random.default_rng(1).uniform(size=(30, 2))
    a, b = build_knn_graph(pts, k=3), build_knn_graph(pts, k=3)
    assert np.array_equal(a.edges, b.edges)
    assert np.all(a.degrees() >= 1)


@pytest.mark.parametrize("points, k", [
    ([[0.0, 0.0]], 1),
    ([[0.0], [np.nan], [1.0]], 1),
    ([[0.0], [1.0], [2.0]], 3),
    ([[0.0], [1.0], [2.0]], 0),
])
def test_knn_rejects_bad_input(points, k):
    with pytest.raises(InvalidInputError):
        build_knn_graph(points, k)


def test_graph_invariants_enforced():
    with pytest.raises(InvalidInputError):
        Graph(3, [[1, 0]], [1.0])
    with pytest.raises(InvalidInputError):
        Graph(3, [[0, 1], [0, 1]], [1.0, 1.0])
    with pytest.raises(InvalidInputError):
        Graph(3, [[0, 1]], [-0.5])
    with pytest.raises(InvalidInputError):
        Graph(2, [[0, 2]], [1.0])


def test_chain_and_grid_builders():
    assert chain_graph(4).edges.tolist() == [[0, 1], [1, 2], [2, 3]]
    g = grid_graph(2, 3, weight=0.5)
    assert g.num_vertices == 6 and g.num_edges == 7
    assert np.all(g.edge_tv_weight == 0.5)
    assert [0, 3] in g.edges.tolist() and [2, 5] in g.edges.tolist()


def test_with_weights_keeps_structure():
    g = chain_graph(4).with_weights([1.0, 2.0, 3.0])
    assert g.edge_tv_weight.tolist() == [1.0, 2.0, 3.0]
    assert g.with_weights(0.0).edge_tv_weight.sum() == 0.0
