"""Dataset round-trips, loader diagnostics, generators, label checkers."""

from pathlib import Path

import numpy as np
import pytest

from vcnet.data import (
    GraphRecord,
    SyntheticSpec,
    dumps_dataset,
    encode_molecule_like,
    generate,
    graphs_of,
    has_triangle,
    labels_of,
    load_dataset,
    loads_dataset,
    majority_label,
    parity_label,
    save_dataset,
)
from vcnet.errors import ConfigError, DataError
from vcnet.graphs import Graph

FIXTURE = Path(__file__).parent / "data" / "conformance.jsonl"


def _k3(label=1):
    return Graph(nodes=np.array([[1.0, 0.0], [1.0, 0.5], [1.0, 1.0]]),
                 edges=((0, 1, 0), (1, 2, 0), (2, 0, 0)), n_edge_types=1, label=label)


# -- serialization ---------------------------------------------------------------


def test_roundtrip_is_byte_stable(tmp_path):
    records = [
        GraphRecord("a", _k3()),
        GraphRecord("b", Graph(nodes=np.array([[0.25, -1.5]]), edges=(), n_edge_types=1,
                               label=0, graph_attrs=np.array([3.5, 0.125]))),
    ]
    text = dumps_dataset(records)
    again = dumps_dataset(loads_dataset(text))
    assert again == text
    path = tmp_path / "x.jsonl"
    save_dataset(records, path)
    loaded = load_dataset(path)
    save_dataset(loaded, tmp_path / "y.jsonl")
    assert (tmp_path / "y.jsonl").read_bytes() == path.read_bytes()


def test_conformance_fixture_parses_and_reserializes():
    records = load_dataset(FIXTURE)
    assert [r.id for r in records] == ["tri-0", "path-1", "attr-2", "lone-3"]
    assert labels_of(records) == [1, 0, 1, 0]
    g = records[0].graph
    assert g.n_nodes == 3 and g.attr_dim == 2 and has_triangle(g)
    assert records[2].graph.graph_attrs.tolist() == [0.5, -1.0]
    assert records[3].graph.edges == ()
    assert dumps_dataset(records) == FIXTURE.read_text()


def test_loader_skips_blank_lines():
    text = dumps_dataset([GraphRecord("a", _k3())])
    assert len(loads_dataset("\n" + text + "\n\n")) == 1


def test_loader_reports_line_numbers():
    good = dumps_dataset([GraphRecord("a", _k3())]).rstrip("\n")
    cases = [
        (good + "\n{broken\n", "line 2"),
        (good + "\n" + '{"id":"b"}' + "\n", "line 2"),
        ('{"id":"","label":0,"n_edge_types":0,"nodes":[[1.0]],"edges":[]}\n', "line 1"),
        (good + "\n" + good.replace('"label":1', '"label":3') + "\n", "line 2"),
        (good + "\n" + good.replace("[1.0,0.5]", "[1.0]") + "\n", "line 2"),
    ]
    for text, expect in cases:
        with pytest.raises(DataError) as err:
            loads_dataset(text)
        assert expect in str(err.value), text


def test_loader_enforces_file_wide_consistency():
    a = dumps_dataset([GraphRecord("a", _k3())])
    wider = Graph(nodes=np.zeros((2, 3)), edges=(), n_edge_types=1, label=0)
    b = dumps_dataset([GraphRecord("b", wider)])
    with pytest.raises(DataError) as err:
        loads_dataset(a + b)
    assert "width" in str(err.value)
    more_types = Graph(nodes=np.zeros((2, 2)), edges=(), n_edge_types=2, label=0)
    c = dumps_dataset([GraphRecord("c", more_types)])
    with pytest.raises(DataError) as err:
        loads_dataset(a + c)
    assert "n_edge_types" in str(err.value)


def test_loader_missing_file():
    with pytest.raises(DataError):
        load_dataset("/nonexistent/nowhere.jsonl")


# -- label checkers ----------------------------------------------------------------


def test_has_triangle_cases():
    assert has_triangle(_k3())
    path = Graph(nodes=np.zeros((4, 1)), edges=((0, 1, 0), (1, 2, 0), (2, 3, 0)),
                 n_edge_types=1)
    assert not has_triangle(path)
    square = Graph(nodes=np.zeros((4, 1)),
                   edges=((0, 1, 0), (1, 2, 0), (2, 3, 0), (3, 0, 0)), n_edge_types=1)
    assert not has_triangle(square)
    braced = Graph(nodes=square.nodes, edges=square.edges + ((0, 2, 0),), n_edge_types=1)
    assert has_triangle(braced)
    # direction and self-loops are irrelevant
    looped = Graph(nodes=np.zeros((3, 1)), edges=((0, 0, 0), (0, 1, 0), (2, 1, 0), (0, 2, 0)),
                   n_edge_types=1)
    assert has_triangle(looped)


def _marked_path(m_first, m_last, n=5):
    attrs = np.zeros((n, 2))
    attrs[:, 0] = 1.0
    attrs[0, 1] = m_first
    attrs[n - 1, 1] = m_last
    edges = tuple((i, i + 1, 0) for i in range(n - 1)) + tuple((i + 1, i, 0) for i in range(n - 1))
    return Graph(nodes=attrs, edges=edges, n_edge_types=1)


def test_parity_label_cases():
    assert parity_label(_marked_path(1.0, 1.0)) == 0
    assert parity_label(_marked_path(-1.0, -1.0)) == 0
    assert parity_label(_marked_path(1.0, -1.0)) == 1
    assert parity_label(_marked_path(-1.0, 1.0)) == 1
    with pytest.raises(DataError):
        parity_label(_k3())  # no endpoints at all
    bad = _marked_path(0.0, 1.0)
    with pytest.raises(DataError):
        parity_label(bad)


def test_majority_label_cases():
    def tree(signs):
        n = len(signs)
        attrs = np.column_stack([np.ones(n), np.asarray(signs, dtype=np.float64)])
        edges = tuple((0, i, 0) for i in range(1, n)) + tuple((i, 0, 0) for i in range(1, n))
        return Graph(nodes=attrs, edges=edges, n_edge_types=1)

    assert majority_label(tree([1, 1, 1, -1, -1])) == 1
    assert majority_label(tree([1, 1, -1, -1, -1])) == 0
    with pytest.raises(DataError):
        majority_label(tree([1, 1, -1, -1]))


# -- generators ----------------------------------------------------------------------


def test_spec_aliases_and_validation():
    assert SyntheticSpec("triangle", 1).task == "triangle-presence"
    assert SyntheticSpec("parity", 1).task == "long-range-parity"
    assert SyntheticSpec("majority", 1).task == "attr-majority"
    assert SyntheticSpec("long-range-parity", 1).task == "long-range-parity"
    with pytest.raises(ConfigError):
        SyntheticSpec("rings", 1)
    with pytest.raises(ConfigError):
        SyntheticSpec("parity", 0)
    with pytest.raises(ConfigError):
        SyntheticSpec("parity", 5, min_nodes=9, max_nodes=8)


def test_generation_is_deterministic():
    spec = SyntheticSpec("parity", 30, seed=11)
    assert dumps_dataset(generate(spec)) == dumps_dataset(generate(spec))
    other = SyntheticSpec("parity", 30, seed=12)
    assert dumps_dataset(generate(other)) != dumps_dataset(generate(spec))


def test_generated_labels_survive_independent_rechecking():
    for task, checker in (("triangle", lambda g: int(has_triangle(g))),
                          ("parity", parity_label),
                          ("majority", majority_label)):
        records = generate(SyntheticSpec(task, 40, min_nodes=6, max_nodes=9, seed=2))
        assert len(records) == 40
        for rec in records:
            assert checker(rec.graph) == rec.graph.label, rec.id
        labels = labels_of(records)
        assert 0 < sum(labels) < 40  # both classes show up


def test_triangle_task_alternates_labels():
    records = generate(SyntheticSpec("triangle", 10, seed=0))
    assert labels_of(records) == [0, 1] * 5


def test_parity_graphs_are_marked_paths():
    records = generate(SyntheticSpec("parity", 25, min_nodes=8, max_nodes=12, seed=4))
    for rec in records:
        g = rec.graph
        assert 8 <= g.n_nodes <= 12
        assert np.all(g.nodes[:, 0] == 1.0)
        marks = g.nodes[:, 1]
        assert sorted(np.abs(marks[marks != 0.0])) == [1.0, 1.0]
        assert len(g.edges) == 2 * (g.n_nodes - 1)
        parity_label(g)  # raises unless it is a genuine 2-endpoint path
    assert records[0].id == "long-range-parity-00000"


def test_graphs_and_labels_helpers():
    records = generate(SyntheticSpec("majority", 5, seed=1))
    assert [g.label for g in graphs_of(records)] == labels_of(records)


# -- molecule-like encoding ------------------------------------------------------------


def test_encode_molecule_like_example():
    g = encode_molecule_like(
        atoms=[("C", 4, 3), ("C", 4, 2), ("O", 2, 1)],
        bonds=[(0, 1, "single", False), (1, 2, "single", False)],
        label=1,
    )
    assert g.attr_dim == 14
    assert g.n_edge_types == 8
    assert g.label == 1
    assert g.nodes[0, 0] == 1.0 and g.nodes[2, 2] == 1.0  # C one-hot, O one-hot
    assert g.nodes[1, 12] == 4.0 and g.nodes[1, 13] == 2.0
    assert set(g.edges) == {(0, 1, 0), (1, 0, 0), (1, 2, 0), (2, 1, 0)}


def test_encode_molecule_like_ring_and_kind_types():
    g = encode_molecule_like(
        atoms=[("C", 3, 1), ("N", 3, 0)],
        bonds=[(0, 1, "aromatic", True)],
    )
    assert set(g.edges) == {(0, 1, 7), (1, 0, 7)}
    assert g.label is None
    double = encode_molecule_like([("C", 1, 0), ("O", 1, 0)], [(0, 1, "double", False)])
    assert set(double.edges) == {(0, 1, 2), (1, 0, 2)}


def test_encode_molecule_like_rejects_garbage():
    with pytest.raises(DataError):
        encode_molecule_like([], [])
    with pytest.raises(DataError):
        encode_molecule_like([("Xx", 0, 0)], [])
    with pytest.raises(DataError):
        encode_molecule_like([("C", 1, 0)], [(0, 0, "single", False)])
    with pytest.raises(DataError):
        encode_molecule_like([("C", 1, 0), ("C", 1, 0)], [(0, 1, "quadruple", False)])
    with pytest.raises(DataError):
        encode_molecule_like([("C", -1, 0)], [])
