# tests/test_storage.py
from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from config.errors import BundleFormatError, InvalidInputError
from graphs.graph import Graph, chain_graph
from problems.eeg import EEGInstance
from problems.labeling import LabelingInstance
from storage.bundle import family_of, load_bundle, read_meta, save_bundle
from storage.formats import (
    read_graph,
    read_matrix,
    read_vector,
    write_graph,
    write_matrix,
    write_vector,
)


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


# ---------------- Graph files ----------------
def test_graph_file_round_trip(tmp_path):
    g = Graph(5, [[0, 1], [1, 3]], [0.5, 2.25])
    back = read_graph(write_graph(tmp_path / "g.txt", g))
    assert back.num_vertices == 5
    assert back.edges.tolist() == [[0, 1], [1, 3]]
    assert back.edge_tv_weight.tolist() == [0.5, 2.25]


def test_graph_file_normalizes_edge_order(tmp_path):
    g = read_graph(_write(tmp_path / "g.txt", "# chain\n2 1 1.0\n1 0 3\n"))
    assert g.edges.tolist() == [[0, 1], [1, 2]]
    assert g.edge_tv_weight.tolist() == [3.0, 1.0]


@pytest.mark.parametrize("text, line, field", [
    ("0 1 1\n1 2 abc\n", 2, "lambda"),
    ("0 1 -1\n", 1, "lambda"),
    ("0 0 1\n", 1, "vertex id"),
    ("0 x 1\n", 1, "vertex id"),
    ("0 1\n", 1, "edge"),
    ("V two\n0 1 1\n", 1, "header"),
])
def test_graph_file_errors_name_line_and_field(tmp_path, text, line, field):
    with pytest.raises(BundleFormatError) as exc:
        read_graph(_write(tmp_path / "g.txt", text))
    assert (exc.value.line, exc.value.field) == (line, field)
    assert "g.txt" in str(exc.value)


def test_graph_file_structural_errors(tmp_path):
    with pytest.raises(BundleFormatError, match="duplicate edge"):
        read_graph(_write(tmp_path / "dup.txt", "0 1 1\n1 0 2\n"))
    with pytest.raises(BundleFormatError) as exc:
        read_graph(_write(tmp_path / "short.txt", "V 2\n0 3 1\n"))
    assert exc.value.field == "header"
    with pytest.raises(BundleFormatError):
        read_graph(tmp_path / "missing.txt")


@pytest.mark.parametrize("reader, name", [
    (read_graph, "g.txt"),
    (read_matrix, "m.csv"),
    (read_vector, "v.txt"),
])
def test_invalid_utf8_names_the_line(tmp_path, reader, name):
    path = tmp_path / name
    path.write_bytes(b"# header\n1\n\xff\xfe 2\n")
    with pytest.raises(BundleFormatError) as exc:
        reader(path)
    assert (exc.value.line, exc.value.field) == (3, "encoding")


# ---------------- Matrices and vectors ----------------
@pytest.mark.parametrize("name", ["phi.csv", "phi.bin"])
def test_matrix_round_trip_is_exact(tmp_path, name):
    m = np.random.default_rng(0).standard_normal((4, 3))
    assert np.array_equal(read_matrix(write_matrix(tmp_path / name, m)), m)


def test_matrix_errors(tmp_path):
    with pytest.raises(BundleFormatError) as exc:
        read_matrix(_write(tmp_path / "bad.csv", "1,2\n3,x\n"))
    assert (exc.value.line, exc.value.field) == (2, "matrix row")
    with pytest.raises(BundleFormatError) as exc:
        read_matrix(_write(tmp_path / "ragged.csv", "1,2\n3\n"))
    assert exc.value.line == 2
    raw = tmp_path / "short.bin"
    raw.write_bytes(b"2 2\n" + np.zeros(3, dtype="<f8").tobytes())
    with pytest.raises(BundleFormatError) as exc:
        read_matrix(raw)
    assert exc.value.field == "payload"


def test_vector_round_trip_and_errors(tmp_path):
    v = np.array([0.1, -2.5, 1e-17])
    assert np.array_equal(read_vector(write_vector(tmp_path / "v.txt", v)), v)
    ints = read_vector(write_vector(tmp_path / "i.txt", np.array([3, 1, 4])), np.int64)
    assert ints.tolist() == [3, 1, 4] and ints.dtype == np.int64
    with pytest.raises(BundleFormatError) as exc:
        read_vector(_write(tmp_path / "bad.txt", "1\n2\nfoo\n"))
    assert (exc.value.line, exc.value.field) == (3, "value")
    with pytest.raises(BundleFormatError):
        read_vector(_write(tmp_path / "wide.txt", "1 2\n3 4\n"))


# ---------------- Bundles ----------------
def test_eeg_bundle_round_trip(eeg_bundle, small_eeg):
    back = load_bundle(eeg_bundle)
    assert isinstance(back, EEGInstance) and family_of(back) == "eeg"
    assert np.array_equal(back.phi.matrix, small_eeg.phi.matrix)
    assert np.array_equal(back.y, small_eeg.y)
    assert np.array_equal(back.lambda_l1, small_eeg.lambda_l1)
    assert np.array_equal(back.x_true, small_eeg.x_true)
    assert np.array_equal(back.graph.edge_tv_weight, small_eeg.graph.edge_tv_weight)
    assert back.name == small_eeg.name
    assert read_meta(eeg_bundle)["SEED"] == "3"


def test_labeling_bundle_round_trip(labeling_bundle, small_labeling):
    back = load_bundle(labeling_bundle)
    assert isinstance(back, LabelingInstance) and family_of(back) == "labeling"
    assert np.array_equal(back.q, small_labeling.q)
    assert back.beta == small_labeling.beta
    assert np.array_equal(back.labels_true, small_labeling.labels_true)
    assert np.array_equal(back.train, small_labeling.train)


def test_raw_phi_is_picked_up(tmp_path, small_eeg):
    d = save_bundle(tmp_path / "b", small_eeg)
    (d / "phi.csv").unlink()
    write_matrix(d / "phi.bin", small_eeg.phi.matrix)
    assert np.array_equal(load_bundle(d).phi.matrix, small_eeg.phi.matrix)


def test_bad_meta_and_missing_bundle(tmp_path, eeg_bundle):
    _write(eeg_bundle / "instance.env", "FAMILY=lidar\n")
    with pytest.raises(BundleFormatError) as exc:
        load_bundle(eeg_bundle)
    assert exc.value.field == "FAMILY"
    with pytest.raises(InvalidInputError):
        load_bundle(tmp_path / "nowhere")


def test_mismatched_vectors_are_reported(eeg_bundle, small_eeg):
    write_vector(eeg_bundle / "y.txt", small_eeg.y[:-1])
    with pytest.raises(BundleFormatError) as exc:
        load_bundle(eeg_bundle)
    assert exc.value.field == "y"


def test_labeling_q_must_match_graph(tmp_path):
    inst = LabelingInstance(chain_graph(3), np.full((3, 2), 0.5))
    d = save_bundle(tmp_path / "lab", inst)
    write_matrix(d / "q.csv", np.full((2, 2), 0.5))
    with pytest.raises(BundleFormatError) as exc:
        load_bundle(d)
    assert exc.value.field == "q"
