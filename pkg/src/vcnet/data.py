"""Dataset serialization and synthetic task generators.

File format: JSON Lines, one graph per line, keys in this order::

    {"id": "...", "label": 0|1, "n_edge_types": P,
     "nodes": [[...], ...],            # n rows of d_x floats
     "edges": [[src, dst, type], ...], # directed, type in [0, P)
     "graph_attrs": [...]}             # optional graph-level input

``n_edge_types`` and the attribute widths must agree across a file.
``save_dataset`` always emits the canonical compact form with floats
serialized by repr, so load followed by save is byte-stable and two
generator runs with one seed produce byte-identical files. All loader
errors carry 1-based line numbers.

Three synthetic tasks ship with the package; each generated label is
re-derived by an independent checker before the graph leaves the factory:

* ``triangle-presence`` - random graphs, label says whether any three nodes
  form a triangle; attribute channels are a constant and the scaled degree.
* ``long-range-parity`` - undirected path graphs whose two endpoints carry
  a +-1 mark in channel 1; label 1 iff the marks disagree. Every signal
  relevant to the label sits at maximum distance, so a readout limited to
  short-range propagation cannot beat chance (channel 0 is constant 1).
* ``attr-majority`` - random trees with +-1 in channel 1 per node; label 1
  iff the strict majority is positive. Solvable from the mean node state,
  which makes it the control task.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .graphs import Graph

ATOM_SYMBOLS = ("C", "N", "O", "S", "F", "Cl", "Br", "I", "P", "B", "Si", "Se")
BOND_KINDS = ("single", "double", "triple", "aromatic")
MOLECULE_EDGE_TYPES = 2 * len(BOND_KINDS)

TASKS = ("triangle-presence", "long-range-parity", "attr-majority")
_TASK_ALIASES = {
    "triangle": "triangle-presence",
    "parity": "long-range-parity",
    "majority": "attr-majority",
}


@dataclass(frozen=True)
class GraphRecord:
    """One dataset row: a stable id plus the labeled graph."""

    id: str
    graph: Graph

    @property
    def label(self) -> int | None:
        return self.graph.label


def graphs_of(records: list[GraphRecord]) -> list[Graph]:
    return [r.graph for r in records]


def labels_of(records: list[GraphRecord]) -> list[int]:
    return [r.graph.label for r in records]


# ---------------------------------------------------------------------------
# JSONL


def _record_to_obj(rec: GraphRecord) -> dict:
    g = rec.graph
    obj = {
        "id": rec.id,
        "label": g.label,
        "n_edge_types": g.n_edge_types,
        "nodes": [row.tolist() for row in g.nodes],
        "edges": [[s, d, p] for s, d, p in g.edges],
    }
    if g.graph_attrs is not None:
        obj["graph_attrs"] = g.graph_attrs.tolist()
    return obj


def _record_from_obj(obj, line: int) -> GraphRecord:
    def bad(msg: str):
        return DataError(f"line {line}: {msg}")

    if not isinstance(obj, dict):
        raise bad("record must be a JSON object")
    for key in ("id", "label", "n_edge_types", "nodes", "edges"):
        if key not in obj:
            raise bad(f"missing field {key!r}")
    rid = obj["id"]
    if not isinstance(rid, str) or not rid:
        raise bad("id must be a non-empty string")
    label = obj["label"]
    if label not in (0, 1):
        raise bad(f"label must be 0 or 1, got {label!r}")
    n_edge_types = obj["n_edge_types"]
    if not isinstance(n_edge_types, int) or n_edge_types < 0:
        raise bad(f"n_edge_types must be a non-negative integer, got {n_edge_types!r}")
    nodes = obj["nodes"]
    if not isinstance(nodes, list) or not nodes:
        raise bad("nodes must be a non-empty list of attribute rows")
    widths = {len(row) if isinstance(row, list) else -1 for row in nodes}
    if widths == {-1} or len(widths) != 1 or -1 in widths:
        raise bad("every node row must be a list, all of one width")
    edges = obj["edges"]
    if not isinstance(edges, list):
        raise bad("edges must be a list")
    for e in edges:
        if not (isinstance(e, list) and len(e) == 3 and all(isinstance(v, int) for v in e)):
            raise bad(f"edge must be [src, dst, type] of integers, got {e!r}")
    ga = obj.get("graph_attrs")
    if ga is not None and not isinstance(ga, list):
        raise bad("graph_attrs must be a list of floats")
    try:
        graph = Graph(
            nodes=np.asarray(nodes, dtype=np.float64),
            edges=tuple((e[0], e[1], e[2]) for e in edges),
            n_edge_types=n_edge_types,
            graph_attrs=None if ga is None else np.asarray(ga, dtype=np.float64),
            label=label,
        )
    except (DataError, ValueError) as e:
        raise bad(str(e)) from e
    return GraphRecord(id=rid, graph=graph)


def loads_dataset(text: str, source: str = "<string>") -> list[GraphRecord]:
    records: list[GraphRecord] = []
    attr_width: int | None = None
    edge_types: int | None = None
    ga_width: int | None = None
    for line_no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"{source}: line {line_no}: invalid JSON: {e}") from e
        try:
            rec = _record_from_obj(obj, line_no)
        except DataError as e:
            raise DataError(f"{source}: {e}") from e
        g = rec.graph
        if attr_width is None:
            attr_width, edge_types = g.attr_dim, g.n_edge_types
        elif g.attr_dim != attr_width:
            raise DataError(f"{source}: line {line_no}: attribute width {g.attr_dim} != {attr_width} used earlier")
        elif g.n_edge_types != edge_types:
            raise DataError(f"{source}: line {line_no}: n_edge_types {g.n_edge_types} != {edge_types} used earlier")
        if g.graph_attrs is not None:
            w = g.graph_attrs.shape[0]
            if ga_width is None:
                ga_width = w
            elif w != ga_width:
                raise DataError(f"{source}: line {line_no}: graph_attrs width {w} != {ga_width} used earlier")
        records.append(rec)
    return records


def load_dataset(path: str | Path) -> list[GraphRecord]:
    """Read a JSONL dataset; all validation errors point at their line."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read dataset {p}: {e}") from e
    return loads_dataset(text, source=str(p))


def dumps_dataset(records: list[GraphRecord]) -> str:
    return "".join(
        json.dumps(_record_to_obj(r), separators=(",", ":")) + "\n" for r in records
    )


def save_dataset(records: list[GraphRecord], path: str | Path) -> None:
    """Write canonical JSONL (compact separators, fixed key order)."""
    Path(path).write_text(dumps_dataset(records), encoding="utf-8")


# ---------------------------------------------------------------------------
# independent label checkers


def has_triangle(g: Graph) -> bool:
    """Brute-force triple enumeration over the symmetrized edge set."""
    adj = [set() for _ in range(g.n_nodes)]
    for s, d, _ in g.edges:
        if s != d:
            adj[s].add(d)
            adj[d].add(s)
    n = g.n_nodes
    for i in range(n):
        for j in adj[i]:
            if j <= i:
                continue
            for k in adj[j]:
                if k > j and k in adj[i]:
                    return True
    return False


def parity_label(g: Graph) -> int:
    """Recompute the endpoint-mark parity from scratch (degree-1 nodes)."""
    neigh = [set() for _ in range(g.n_nodes)]
    for s, d, _ in g.edges:
        if s != d:
            neigh[s].add(d)
            neigh[d].add(s)
    ends = [i for i in range(g.n_nodes) if len(neigh[i]) == 1]
    if len(ends) != 2:
        raise DataError(f"not a path: found {len(ends)} endpoints")
    m1, m2 = (float(g.nodes[i, 1]) for i in ends)
    if m1 * m2 == 0.0:
        raise DataError("endpoint mark missing")
    return 1 if m1 * m2 < 0 else 0


def majority_label(g: Graph) -> int:
    pos = int(np.sum(g.nodes[:, 1] > 0))
    if 2 * pos == g.n_nodes:
        raise DataError("tied attribute counts have no majority label")
    return 1 if 2 * pos > g.n_nodes else 0


# ---------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class SyntheticSpec:
    task: str
    n_graphs: int
    min_nodes: int = 8
    max_nodes: int = 12
    seed: int = 0

    def __post_init__(self):
        task = _TASK_ALIASES.get(self.task, self.task)
        if task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; known: {', '.join(TASKS)}")
        object.__setattr__(self, "task", task)
        if self.n_graphs < 1:
            raise ConfigError("n_graphs must be >= 1")
        if not 2 <= self.min_nodes <= self.max_nodes:
            raise ConfigError("need 2 <= min_nodes <= max_nodes")


def _both_ways(pairs: list[tuple[int, int]]) -> tuple[tuple[int, int, int], ...]:
    out: list[tuple[int, int, int]] = []
    for i, j in pairs:
        out.append((i, j, 0))
        out.append((j, i, 0))
    return tuple(out)


def _gen_parity(rng: np.random.Generator, n: int) -> Graph:
    marks = rng.choice((-1.0, 1.0), size=2)
    # random relabeling so node ids carry no positional hint
    perm = rng.permutation(n)
    attrs = np.zeros((n, 2))
    attrs[:, 0] = 1.0
    attrs[perm[0], 1] = marks[0]
    attrs[perm[n - 1], 1] = marks[1]
    pairs = [(int(perm[i]), int(perm[i + 1])) for i in range(n - 1)]
    label = 1 if marks[0] * marks[1] < 0 else 0
    return Graph(nodes=attrs, edges=_both_ways(pairs), n_edge_types=1, label=label)


def _gen_majority(rng: np.random.Generator, n: int) -> Graph:
    signs = rng.choice((-1.0, 1.0), size=n)
    if int(np.sum(signs > 0)) * 2 == n:
        signs[int(rng.integers(n))] *= -1.0
    attrs = np.column_stack([np.ones(n), signs])
    pairs = [(int(rng.integers(i)), i) for i in range(1, n)]
    label = 1 if int(np.sum(signs > 0)) * 2 > n else 0
    return Graph(nodes=attrs, edges=_both_ways(pairs), n_edge_types=1, label=label)


def _gen_triangle(rng: np.random.Generator, n: int, want: int) -> Graph:
    # rejection-sample sparse random graphs until the label comes out right
    for _ in range(10000):
        mask = rng.random((n, n)) < 0.18
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if mask[i, j]]
        g = Graph(
            nodes=np.column_stack([np.ones(n), np.zeros(n)]),
            edges=_both_ways(pairs),
            n_edge_types=1,
            label=want,
        )
        if int(has_triangle(g)) == want:
            deg = np.zeros(n)
            for i, j in pairs:
                deg[i] += 1.0
                deg[j] += 1.0
            attrs = np.column_stack([np.ones(n), deg / max(n - 1, 1)])
            return Graph(nodes=attrs, edges=g.edges, n_edge_types=1, label=want)
    raise DataError("triangle sampler failed to hit the requested label")


def generate(spec: SyntheticSpec) -> list[GraphRecord]:
    """Produce labeled graphs; every label re-derived by its checker."""
    rng = np.random.default_rng(spec.seed)
    records: list[GraphRecord] = []
    for i in range(spec.n_graphs):
        n = int(rng.integers(spec.min_nodes, spec.max_nodes + 1))
        if spec.task == "long-range-parity":
            g = _gen_parity(rng, n)
            check = parity_label(g)
        elif spec.task == "attr-majority":
            g = _gen_majority(rng, n)
            check = majority_label(g)
        else:
            g = _gen_triangle(rng, n, want=i % 2)
            check = int(has_triangle(g))
        if check != g.label:
            raise DataError(f"generator/checker disagree on graph {i} of task {spec.task}")
        records.append(GraphRecord(id=f"{spec.task}-{i:05d}", graph=g))
    return records


# ---------------------------------------------------------------------------
# molecule-like encoding (no chemistry toolkit; purely syntactic)


def encode_molecule_like(
    atoms: list[tuple[str, int, int]],
    bonds: list[tuple[int, int, str, bool]],
    label: int | None = None,
    graph_attrs=None,
) -> Graph:
    """Encode (symbol, degree, hcount) atoms and typed bonds as a graph.

    Node attributes are the one-hot atom symbol followed by the degree and
    hydrogen count as raw floats. Each bond contributes both directions of
    edge type ``2 * kind_index + in_ring``, so single/double/triple/aromatic
    bonds in and out of rings map to the 8 edge types.
    """
    if not atoms:
        raise DataError("molecule needs at least one atom")
    n = len(atoms)
    d = len(ATOM_SYMBOLS)
    attrs = np.zeros((n, d + 2))
    for i, (symbol, degree, hcount) in enumerate(atoms):
        if symbol not in ATOM_SYMBOLS:
            raise DataError(f"unknown atom symbol {symbol!r} at position {i}")
        if degree < 0 or hcount < 0:
            raise DataError(f"negative degree or hcount at position {i}")
        attrs[i, ATOM_SYMBOLS.index(symbol)] = 1.0
        attrs[i, d] = float(degree)
        attrs[i, d + 1] = float(hcount)
    edges: list[tuple[int, int, int]] = []
    for i, j, kind, in_ring in bonds:
        if kind not in BOND_KINDS:
            raise DataError(f"unknown bond kind {kind!r}")
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise DataError(f"bond ({i}, {j}) is not between two distinct atoms")
        etype = 2 * BOND_KINDS.index(kind) + int(bool(in_ring))
        edges.append((i, j, etype))
        edges.append((j, i, etype))
    return Graph(
        nodes=attrs,
        edges=tuple(edges),
        n_edge_types=MOLECULE_EDGE_TYPES,
        graph_attrs=None if graph_attrs is None else np.asarray(graph_attrs, dtype=np.float64),
        label=label,
    )
