"""Attributed directed multigraphs and the indexing the recurrence needs."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

Edge = tuple[int, int, int]  # (src, dst, edge_type): src is an in-neighbor of dst


@dataclass(frozen=True, eq=False)
class Graph:
    """One labeled graph: node attribute rows, typed directed edges.

    ``nodes`` is an (n, d_x) float64 array; ``edges`` may repeat (multiset
    semantics, every copy counts); ``n_edge_types`` is the dataset-declared
    type count, which may exceed the types actually present in this graph.
    """

    nodes: np.ndarray
    edges: tuple[Edge, ...]
    n_edge_types: int
    graph_attrs: np.ndarray | None = None
    label: int | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        if nodes.ndim != 2 or nodes.shape[0] < 1:
            raise DataError(f"graph needs an (n>=1, d_x) node attribute matrix, got shape {nodes.shape}")
        if not math.isfinite(float(np.sum(nodes))):
            raise DataError("non-finite node attributes")
        object.__setattr__(self, "nodes", nodes)
        n = nodes.shape[0]
        if self.n_edge_types < 0:
            raise DataError(f"n_edge_types must be >= 0, got {self.n_edge_types}")
        edges = tuple((int(s), int(d), int(p)) for s, d, p in self.edges)
        for s, d, p in edges:
            if not (0 <= s < n and 0 <= d < n):
                raise DataError(f"edge ({s}, {d}, {p}) points outside the {n} nodes")
            if not 0 <= p < self.n_edge_types:
                raise DataError(f"edge type {p} outside declared range [0, {self.n_edge_types})")
        object.__setattr__(self, "edges", edges)
        if self.graph_attrs is not None:
            ga = np.asarray(self.graph_attrs, dtype=np.float64)
            if ga.ndim != 1:
                raise DataError("graph_attrs must be a flat vector")
            if not math.isfinite(float(np.sum(ga))):
                raise DataError("non-finite graph attributes")
            object.__setattr__(self, "graph_attrs", ga)
        if self.label not in (None, 0, 1):
            raise DataError(f"label must be 0, 1, or absent, got {self.label!r}")

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def attr_dim(self) -> int:
        return self.nodes.shape[1]


class NeighborIndex:
    """Per-(node, edge type) arrays of in-neighbor node ids.

    An edge (src, dst, p) makes src an in-neighbor of dst under type p.
    Duplicate edges yield duplicate entries. Built once per graph; treat as
    immutable.
    """

    __slots__ = ("n_nodes", "n_edge_types", "_idx")

    def __init__(self, n_nodes: int, n_edge_types: int, idx: list[list[np.ndarray]]):
        self.n_nodes = n_nodes
        self.n_edge_types = n_edge_types
        self._idx = idx

    def neighbors(self, i: int, p: int) -> np.ndarray:
        """In-neighbors of node i under edge type p (possibly empty, possibly repeating)."""
        return self._idx[i][p]


def build_neighbor_index(g: Graph) -> NeighborIndex:
    collected: list[list[list[int]]] = [[[] for _ in range(g.n_edge_types)] for _ in range(g.n_nodes)]
    for src, dst, p in g.edges:
        collected[dst][p].append(src)
    idx = [[np.asarray(ns, dtype=np.intp) for ns in per_node] for per_node in collected]
    return NeighborIndex(g.n_nodes, g.n_edge_types, idx)


@dataclass(frozen=True, eq=False)
class AugmentedGraph:
    """A graph plus one virtual node wired to every real node.

    The virtual node has no entry in the base edge list; the recurrence
    treats it specially. ``virtual_input`` is its input vector: the graph's
    own attributes when present, otherwise zeros of the requested width.
    """

    base: Graph
    virtual_input: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.base.n_nodes


def augment(g: Graph, input_dim: int | None = None) -> AugmentedGraph:
    """Attach the virtual node; never mutates g.

    When g carries graph_attrs they become the virtual input (input_dim, if
    given, must agree); otherwise the virtual input is a zero vector of
    input_dim, defaulting to the node attribute width.
    """
    if g.graph_attrs is not None:
        if input_dim is not None and input_dim != g.graph_attrs.shape[0]:
            raise DataError(
                f"graph-level input has width {g.graph_attrs.shape[0]}, model expects {input_dim}"
            )
        x0 = g.graph_attrs.copy()
    else:
        x0 = np.zeros(input_dim if input_dim is not None else g.attr_dim)
    return AugmentedGraph(base=g, virtual_input=x0)


def undirected_expand(g: Graph) -> Graph:
    """Make every typed edge appear in both directions.

    Multiplicities are symmetrized by max: whichever direction occurs more
    often sets the count for both. Already-symmetric graphs (including any
    output of this function) come back unchanged, edge order included.
    """
    counts = Counter(g.edges)
    additions: list[Edge] = []
    seen: Counter = Counter()
    for s, d, p in g.edges:
        seen[(s, d, p)] += 1
        if s == d:
            continue
        rev = (d, s, p)
        # top up the reverse direction the first time we can tell it is short
        if seen[(s, d, p)] == counts[(s, d, p)]:
            deficit = counts[(s, d, p)] - counts[rev]
            additions.extend([rev] * max(deficit, 0))
    if not additions:
        return g
    return Graph(
        nodes=g.nodes,
        edges=g.edges + tuple(additions),
        n_edge_types=g.n_edge_types,
        graph_attrs=g.graph_attrs,
        label=g.label,
    )
