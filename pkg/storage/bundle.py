# storage/bundle.py
"""Instance bundles: a directory holding one problem instance.

    instance.env     FAMILY=eeg|labeling, NAME, BETA (labeling), SEED (synthetic)
    graph.txt        graph format of storage.formats
    eeg:       phi.csv (or phi.bin), y.txt, lambda_l1.txt, [x_true.txt]
    labeling:  q.csv, [labels_true.txt], [train.txt]
"""
from __future__ import annotations

from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from dotenv import dotenv_values

from config.errors import BundleFormatError, InvalidInputError
from operators.smooth import DenseOperator
from problems.eeg import EEGInstance
from problems.labeling import LabelingInstance
from storage.formats import (
    read_graph,
    read_matrix,
    read_vector,
    text_lines,
    write_graph,
    write_matrix,
    write_vector,
)

META_FILE = "instance.env"
FAMILIES = ("eeg", "labeling")

Instance = Union[EEGInstance, LabelingInstance]


def family_of(instance: Instance) -> str:
    return "eeg" if isinstance(instance, EEGInstance) else "labeling"


def read_meta(directory) -> Dict[str, str]:
    path = Path(directory) / META_FILE
    if not path.exists():
        raise BundleFormatError(path, None, "file", "not found")
    text_lines(path)  # undecodable bytes get a line number before dotenv sees them
    meta = {k.upper(): v for k, v in dotenv_values(path).items() if v is not None}
    family = meta.get("FAMILY", "").lower()
    if family not in FAMILIES:
        raise BundleFormatError(path, None, "FAMILY", f"expected one of {FAMILIES}, got {family!r}")
    meta["FAMILY"] = family
    return meta


def save_bundle(directory, instance: Instance, seed: Optional[int] = None) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    meta = {"FAMILY": family_of(instance), "NAME": instance.name}
    if seed is not None:
        meta["SEED"] = str(seed)
    write_graph(d / "graph.txt", instance.graph)
    if isinstance(instance, EEGInstance):
        write_matrix(d / "phi.csv", instance.phi.matrix)
        write_vector(d / "y.txt", instance.y)
        write_vector(d / "lambda_l1.txt", instance.lambda_l1)
        if instance.x_true is not None:
            write_vector(d / "x_true.txt", instance.x_true)
    else:
        meta["BETA"] = repr(float(instance.beta))
        write_matrix(d / "q.csv", instance.q)
        if instance.labels_true is not None:
            write_vector(d / "labels_true.txt", instance.labels_true)
        if instance.train is not None:
            write_vector(d / "train.txt", instance.train)
    (d / META_FILE).write_text("".join(f"{k}={v}\n" for k, v in meta.items()))
    return d


def _optional(path: Path, dtype=np.float64):
    return read_vector(path, dtype) if path.exists() else None


def load_bundle(directory) -> Instance:
    """Raises BundleFormatError naming the file, line and field of the first problem."""
    d = Path(directory)
    if not d.is_dir():
        raise InvalidInputError(f"instance bundle {d} is not a directory")
    meta = read_meta(d)
    graph = read_graph(d / "graph.txt")
    name = meta.get("NAME", d.name)

    if meta["FAMILY"] == "eeg":
        phi_path = next((d / f for f in ("phi.csv", "phi.bin", "phi.raw", "phi.f64") if (d / f).exists()),
                        d / "phi.csv")
        phi = read_matrix(phi_path)
        y = read_vector(d / "y.txt")
        l1_path = d / "lambda_l1.txt"
        l1 = read_vector(l1_path) if l1_path.exists() else np.zeros(phi.shape[1])
        if y.shape[0] != phi.shape[0]:
            raise BundleFormatError(d / "y.txt", None, "y", f"{y.shape[0]} values for {phi.shape[0]} rows of Φ")
        if l1.shape[0] != phi.shape[1]:
            raise BundleFormatError(l1_path, None, "lambda_l1", f"{l1.shape[0]} values for {phi.shape[1]} vertices")
        return EEGInstance(DenseOperator(phi), y, graph, l1, _optional(d / "x_true.txt"), name=name)

    try:
        beta = float(meta.get("BETA", "0.1"))
    except ValueError:
        raise BundleFormatError(d / META_FILE, None, "BETA", f"{meta['BETA']!r} is not a number")
    q = read_matrix(d / "q.csv")
    if q.shape[0] != graph.num_vertices:
        raise BundleFormatError(d / "q.csv", None, "q", f"{q.shape[0]} rows for {graph.num_vertices} vertices")
    return LabelingInstance(graph, q, beta, _optional(d / "labels_true.txt", np.int64),
                            _optional(d / "train.txt", np.int64), name=name)
