"""Block layouts, diagonal operators and splitting weights.

A layout is a list of block groups. Each group stores the flat coordinate indices of its
blocks as an array whose leading axis is the block index, so that a group of |E| edge
blocks over K channels is a single (|E|, 2, K) index array and its resolvent runs
vectorized over all blocks at once.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from config.errors import InvalidInputError, LayoutInfeasibleError
from graphs.graph import Graph

logger = logging.getLogger(__name__)

SUM_TOLERANCE = 1e-12
ZERO_LAMBDA_FLOOR = 1e-6

# prox(v, metric, param) -> array shaped like v; param is the group's per-block
# parameter restricted to the same blocks (or None)
BlockProx = Callable[[np.ndarray, np.ndarray, Optional[np.ndarray]], np.ndarray]


@dataclass(frozen=True, eq=False)
class DiagonalOperator:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.values * x

    def inverse(self) -> "DiagonalOperator":
        return DiagonalOperator(1.0 / self.values)

    def is_strictly_positive(self) -> bool:
        return bool(np.all(self.values > 0) and np.all(np.isfinite(self.values)))


def _identity_prox(v, metric, param=None):
    return v


@dataclass(frozen=True, eq=False)
class BlockGroup:
    name: str
    kind: str  # "edges" | "full" | "zero" | "custom"
    coords: np.ndarray
    prox: BlockProx = _identity_prox
    param: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.int64)
        if c.ndim < 2:
            raise InvalidInputError(f"group {self.name}: coords need a leading block axis")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def num_blocks(self) -> int:
        return int(self.coords.shape[0])

    def block(self, i: int) -> np.ndarray:
        return np.sort(self.coords[i].ravel())


@dataclass(frozen=True, eq=False)
class BlockLayout:
    size: int
    groups: Tuple[BlockGroup, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        for g in self.groups:
            if g.coords.size and (g.coords.min() < 0 or g.coords.max() >= self.size):
                raise InvalidInputError(f"group {g.name}: coordinate out of range")
            flat = g.coords.reshape(g.num_blocks, -1)
            srt = np.sort(flat, axis=1)
            if flat.shape[1] > 1 and np.any(srt[:, 1:] == srt[:, :-1]):
                raise InvalidInputError(f"group {g.name}: duplicate coordinate in a block")

    @property
    def num_blocks(self) -> int:
        return sum(g.num_blocks for g in self.groups)

    def blocks(self) -> Iterator[np.ndarray]:
        for g in self.groups:
            for i in range(g.num_blocks):
                yield g.block(i)

    def coverage(self) -> np.ndarray:
        count = np.zeros(self.size, dtype=np.int64)
        for g in self.groups:
            count += np.bincount(g.coords.ravel(), minlength=self.size)
        return count

    def uncovered(self) -> np.ndarray:
        return np.flatnonzero(self.coverage() == 0)

    def with_group(self, group: BlockGroup) -> "BlockLayout":
        return BlockLayout(self.size, self.groups + (group,))


@dataclass(frozen=True, eq=False)
class SplitWeights:
    """One weight array per group, shaped like the group's coords (compact storage)."""
    per_group: Tuple[np.ndarray, ...]

    def __post_init__(self):
        arrays = []
        for w in self.per_group:
            a = np.array(w, dtype=np.float64)
            a.setflags(write=False)
            arrays.append(a)
        object.__setattr__(self, "per_group", tuple(arrays))

    def __getitem__(self, i: int) -> np.ndarray:
        return self.per_group[i]

    def __len__(self) -> int:
        return len(self.per_group)

    def expand(self, layout: BlockLayout) -> "SplitWeights":
        """Dense (n_blocks, N) form, zero off each block's support."""
        out = []
        for g, w in zip(layout.groups, self.per_group):
            dense = np.zeros((g.num_blocks, layout.size))
            rows = np.arange(g.num_blocks)[:, None]
            dense[rows, g.coords.reshape(g.num_blocks, -1)] = w.reshape(g.num_blocks, -1)
            out.append(dense)
        return SplitWeights(tuple(out))


# ---------------- Group builders ----------------
def edge_coords(graph: Graph, channels: int) -> np.ndarray:
    """(E, 2, K) flat indices of both endpoints of every edge over K channels."""
    ch = np.arange(channels)
    return graph.edges[:, :, None] * channels + ch[None, None, :]


def edge_group(graph: Graph, channels: int, prox: BlockProx, name: str = "edges") -> BlockGroup:
    return BlockGroup(name, "edges", edge_coords(graph, channels), prox,
                      param=graph.edge_tv_weight)


def full_group(shape: Sequence[int], prox: BlockProx, name: str = "full",
               param: Optional[np.ndarray] = None) -> BlockGroup:
    n = int(np.prod(shape))
    return BlockGroup(name, "full", np.arange(n).reshape((1,) + tuple(shape)), prox,
                      param=None if param is None else np.asarray(param)[None, ...])


def zero_group(indices: np.ndarray, name: str = "zero") -> BlockGroup:
    """A_i = 0 on the given coordinates: its resolvent is the identity."""
    return BlockGroup(name, "zero", np.asarray(indices, dtype=np.int64)[None, :])


# ---------------- Weights ----------------
def compute_weight_heuristic(graph: Graph, layout: BlockLayout, reserve: float = 0.0) -> SplitWeights:
    """Edge-block weights proportional to λ at each endpoint, full block gets `reserve`.

    At a vertex u covered by edges, edge e gets (1 - reserve) * λ_e / Σ_{e' ∋ u} λ_e'
    (uniform 1/deg(u) when every incident λ is zero). Coordinates no edge touches get
    weight 1 from the full or zero block covering them.
    """
    if not 0.0 <= reserve < 1.0:
        raise InvalidInputError(f"reserve must lie in [0, 1), got {reserve}")
    kinds = [g.kind for g in layout.groups]
    if "custom" in kinds:
        raise InvalidInputError("weight heuristic only handles edge/full/zero groups")
    has_full = "full" in kinds
    if reserve > 0 and not has_full:
        raise InvalidInputError("reserve > 0 requires a full-support block")
    if has_full and reserve == 0:
        raise LayoutInfeasibleError(
            "weight-positivity: zero reserve leaves the full-support block with zero weights")
    if layout.size % graph.num_vertices:
        raise InvalidInputError("layout size is not a multiple of the vertex count")
    channels = layout.size // graph.num_vertices

    lam = graph.edge_tv_weight
    deg = graph.degrees()
    lam_sum = np.bincount(graph.edges.ravel(), weights=np.repeat(lam, 2),
                          minlength=graph.num_vertices)
    degenerate = (deg > 0) & (lam_sum <= 0)
    if np.any(degenerate):
        logger.warning("%d vertices have all incident λ = 0; using uniform 1/deg split",
                       int(degenerate.sum()))
    # a zero-λ edge next to weighted ones still needs a positive weight
    zero_incident = np.bincount(graph.edges.ravel(), weights=np.repeat(lam == 0, 2).astype(np.float64),
                                minlength=graph.num_vertices) > 0
    floor = np.where(zero_incident & ~degenerate,
                     ZERO_LAMBDA_FLOOR * lam_sum / np.maximum(deg, 1), 0.0)

    share = 1.0 - reserve
    vertex_of = np.arange(layout.size) // channels
    touched = deg[vertex_of] > 0
    out: List[np.ndarray] = []
    for g in layout.groups:
        if g.kind == "edges":
            ends = graph.edges  # (E, 2)
            num = np.where(degenerate[ends], 1.0, lam[:, None] + floor[ends])
            den = np.where(degenerate[ends], deg[ends], lam_sum[ends] + floor[ends] * deg[ends])
            w = share * num / den
            out.append(np.broadcast_to(w[:, :, None], g.coords.shape).copy())
        elif g.kind == "full":
            w = np.where(touched[g.coords], reserve, 1.0)
            out.append(w)
        else:  # zero blocks sit on coordinates nothing else covers
            out.append(np.ones(g.coords.shape))

    coverage = layout.coverage()
    if np.any(coverage == 0):
        bad = np.flatnonzero(coverage == 0)
        raise LayoutInfeasibleError(
            f"coordinates {bad[:10].tolist()} are covered by no block")
    return SplitWeights(tuple(out))


@dataclass
class WeightReport:
    passed: bool
    max_deviation: float
    flagged_coordinates: np.ndarray
    support_violations: List[Tuple[str, int]]
    nonpositive: List[Tuple[str, int]]

    def violations(self) -> List[str]:
        msgs = []
        if self.support_violations:
            msgs.append(f"weight-support: weights off block support: {self.support_violations[:5]}")
        if self.nonpositive:
            msgs.append(f"weight-positivity: nonpositive on-support weights: {self.nonpositive[:5]}")
        if self.max_deviation >= SUM_TOLERANCE:
            msgs.append(f"weight-sum: max |Σ W_i - 1| = {self.max_deviation:.3e} at coordinates "
                        f"{self.flagged_coordinates[:10].tolist()}")
        return msgs


def validate_split_weights(weights: SplitWeights, layout: BlockLayout) -> WeightReport:
    """Support, positivity and partition-of-unity checks. Accepts compact or expanded weights."""
    n = layout.size
    sums = np.zeros(n)
    support, nonpos = [], []
    if len(weights) != len(layout.groups):
        raise InvalidInputError(f"{len(weights)} weight arrays for {len(layout.groups)} groups")
    for g, w in zip(layout.groups, weights.per_group):
        nb = g.num_blocks
        c = g.coords.reshape(nb, -1)
        if w.shape == (nb, n) and w.shape != g.coords.shape:
            on = np.take_along_axis(w, c, axis=1)
            off_mask = np.ones((nb, n), dtype=bool)
            off_mask[np.arange(nb)[:, None], c] = False
            for i in np.flatnonzero(np.any((w != 0) & off_mask, axis=1)):
                support.append((g.name, int(i)))
            sums += w.sum(axis=0)
        elif w.shape == g.coords.shape:
            on = w.reshape(nb, -1)
            sums += np.bincount(c.ravel(), weights=on.ravel(), minlength=n)
        else:
            support.extend((g.name, i) for i in range(nb))
            continue
        for i in np.flatnonzero(np.any(on <= 0, axis=1)):
            nonpos.append((g.name, int(i)))

    dev = np.abs(sums - 1.0)
    max_dev = float(dev.max()) if n else 0.0
    flagged = np.flatnonzero(dev >= SUM_TOLERANCE)
    passed = max_dev < SUM_TOLERANCE and not support and not nonpos
    return WeightReport(passed, max_dev, flagged, support, nonpos)
