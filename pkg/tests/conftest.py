# tests/conftest.py
from __future__ import annotations
from pathlib import Path

import numpy as np
import pytest

from graphs.graph import Graph, chain_graph
from operators.smooth import DenseOperator
from problems.eeg import EEGInstance, synth_eeg
from problems.labeling import synth_labeling
from storage.bundle import save_bundle


@pytest.fixture(autouse=True)
def _isolate_cwd(tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    """
    Run tests in an isolated temp cwd so the run registry and output dirs are sandboxed.
    """
    monkeypatch.chdir(tmp_path)
    (tmp_path / "storage").mkdir(parents=True, exist_ok=True)
    monkeypatch.setenv("PFDR_REGISTRY_DB", str(tmp_path / "storage" / "registry.db"))
    yield


@pytest.fixture
def small_eeg() -> EEGInstance:
    """Chain of 12 vertices, 8 observations, planted support of 4."""
    return synth_eeg(seed=3, num_vertices=12, num_observations=8, support_size=4)


@pytest.fixture
def well_posed_eeg() -> EEGInstance:
    """More observations than vertices: f is strongly convex, solvers converge linearly."""
    return synth_eeg(seed=5, num_vertices=10, num_observations=20, support_size=3)


@pytest.fixture
def small_labeling():
    """4x4 grid, K = 3, a fifth of the labels flipped."""
    return synth_labeling(seed=2, num_vertices=16, num_labels=3, flip_prob=0.2)


@pytest.fixture
def separable_eeg():
    """Φ = Id on a chain with λ_tv = 0: the minimizer is max(y - τ, 0) coordinatewise."""
    y = np.array([2.0, -1.0, 0.5, 3.0, 0.05])
    return EEGInstance(DenseOperator(np.eye(5)), y, chain_graph(5, 0.0), np.full(5, 0.1))


@pytest.fixture
def isolated_vertex_graph() -> Graph:
    return Graph(1, np.zeros((0, 2), dtype=np.int64), np.zeros(0))


@pytest.fixture
def eeg_bundle(tmp_path: Path, small_eeg) -> Path:
    return save_bundle(tmp_path / "bundles" / "eeg", small_eeg, seed=3)


@pytest.fixture
def labeling_bundle(tmp_path: Path, small_labeling) -> Path:
    return save_bundle(tmp_path / "bundles" / "labeling", small_labeling, seed=2)
