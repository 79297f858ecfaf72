# storage/formats.py
"""Plain-text and raw-float file formats for graphs, dense matrices and vectors.

Graph:   one edge per line "u v lambda", '#' comments, optional header "V <n>".
Matrix:  CSV with one row per line, or raw little-endian float64 after a text header
         line "rows cols" (suffix .bin / .raw / .f64).
Vector:  one value per line, '#' comments.
"""
from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from config.errors import BundleFormatError
from graphs.graph import Graph

RAW_SUFFIXES = (".bin", ".raw", ".f64")


def text_lines(path: Path) -> List[str]:
    """UTF-8 lines of a text file; an undecodable line is a BundleFormatError naming it."""
    lines = []
    for lineno, raw in enumerate(path.read_bytes().splitlines(), start=1):
        try:
            lines.append(raw.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise BundleFormatError(path, lineno, "encoding", f"invalid UTF-8 at byte {exc.start}") from exc
    return lines


# ---------------- Graph ----------------
def read_graph(path) -> Graph:
    path = Path(path)
    if not path.exists():
        raise BundleFormatError(path, None, "file", "not found")
    declared: Optional[int] = None
    rows: List[Tuple[int, int, float]] = []
    for lineno, raw in enumerate(text_lines(path), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "V":
            if len(parts) != 2 or declared is not None:
                raise BundleFormatError(path, lineno, "header", f"expected one 'V <n>' line, got {line!r}")
            try:
                declared = int(parts[1])
            except ValueError:
                raise BundleFormatError(path, lineno, "header", f"vertex count {parts[1]!r} is not an integer")
            continue
        if len(parts) != 3:
            raise BundleFormatError(path, lineno, "edge", f"expected 'u v lambda', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise BundleFormatError(path, lineno, "vertex id", f"{parts[0]!r} {parts[1]!r} are not integers")
        try:
            lam = float(parts[2])
        except ValueError:
            raise BundleFormatError(path, lineno, "lambda", f"{parts[2]!r} is not a number")
        if u < 0 or v < 0 or u == v:
            raise BundleFormatError(path, lineno, "vertex id", "ids must be distinct and nonnegative")
        if not np.isfinite(lam) or lam < 0:
            raise BundleFormatError(path, lineno, "lambda", "must be finite and nonnegative")
        rows.append((min(u, v), max(u, v), lam))

    inferred = max((r[1] for r in rows), default=-1) + 1
    n = declared if declared is not None else inferred
    if n < inferred:
        raise BundleFormatError(path, None, "header", f"V {n} but edges reach vertex {inferred - 1}")
    edges = np.array([(r[0], r[1]) for r in rows], dtype=np.int64).reshape(-1, 2)
    lam = np.array([r[2] for r in rows], dtype=np.float64)
    if edges.size:
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges, lam = edges[order], lam[order]
        dup = np.flatnonzero(np.all(edges[1:] == edges[:-1], axis=1))
        if dup.size:
            u, v = edges[dup[0]]
            raise BundleFormatError(path, None, "edge", f"duplicate edge {{{u}, {v}}}")
    return Graph(n, edges, lam)


def write_graph(path, graph: Graph) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"V {graph.num_vertices}"]
    lines += [f"{u} {v} {lam:.17g}" for (u, v), lam in zip(graph.edges.tolist(), graph.edge_tv_weight)]
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------- Matrix ----------------
def _first_bad_row(path: Path, ncols: int) -> Tuple[int, str]:
    for lineno, raw in enumerate(text_lines(path), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = line.split(",")
        if len(cells) != ncols:
            return lineno, f"{len(cells)} columns, expected {ncols}"
        for cell in cells:
            try:
                float(cell)
            except ValueError:
                return lineno, f"{cell.strip()!r} is not a number"
    return 0, "unreadable"


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise BundleFormatError(path, None, "file", "not found")
    if path.suffix in RAW_SUFFIXES:
        return _read_raw(path)
    try:
        m = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, dtype=np.float64)
    except ValueError:
        first = next((ln for ln in text_lines(path)
                      if ln.strip() and not ln.strip().startswith("#")), "")
        lineno, reason = _first_bad_row(path, len(first.split(",")))
        raise BundleFormatError(path, lineno or None, "matrix row", reason)
    if not np.all(np.isfinite(m)):
        raise BundleFormatError(path, None, "matrix", "non-finite entry")
    return m


def _read_raw(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        payload = fh.read()
    if len(header) != 2:
        raise BundleFormatError(path, 1, "header", "expected 'rows cols'")
    try:
        rows, cols = int(header[0]), int(header[1])
    except ValueError:
        raise BundleFormatError(path, 1, "header", "rows and cols must be integers")
    data = np.frombuffer(payload, dtype="<f8")
    if data.size != rows * cols:
        raise BundleFormatError(path, None, "payload", f"{data.size} floats for a {rows}x{cols} matrix")
    return data.astype(np.float64).reshape(rows, cols)


def write_matrix(path, matrix, raw: Optional[bool] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if raw if raw is not None else path.suffix in RAW_SUFFIXES:
        with open(path, "wb") as fh:
            fh.write(f"{m.shape[0]} {m.shape[1]}\n".encode("ascii"))
            fh.write(m.astype("<f8").tobytes())
    else:
        np.savetxt(path, m, delimiter=",", fmt="%.17g")
    return path


# ---------------- Vectors ----------------
def read_vector(path, dtype=np.float64) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise BundleFormatError(path, None, "file", "not found")
    try:
        v = np.loadtxt(path, comments="#", ndmin=1, dtype=dtype)
    except ValueError:
        parse = int if np.issubdtype(dtype, np.integer) else float
        for lineno, raw in enumerate(text_lines(path), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                parse(line)
            except ValueError:
                raise BundleFormatError(path, lineno, "value", f"{line!r} is not a single {np.dtype(dtype).name}")
        raise BundleFormatError(path, None, "value", "unreadable vector")
    if v.ndim != 1:
        raise BundleFormatError(path, None, "value", "expected one value per line")
    return v


def write_vector(path, values) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    v = np.asarray(values).ravel()
    fmt = "%d" if np.issubdtype(v.dtype, np.integer) else "%.17g"
    np.savetxt(path, v, fmt=fmt)
    return path
