import networkx as nx
import numpy as np
import pytest

from eljunction.errors import ValidationError
from eljunction.graph import (
    DegreeHistogram,
    GraphSummary,
    adjacency,
    degree_distribution,
    density,
    export_graph,
    read_edge_csv,
)


def test_clique_and_empty():
    a = adjacency(np.ones((5, 5)), 0.5)
    assert density(a) == 1.0
    assert density(adjacency(np.eye(5), 0.5)) == 0.0
    with pytest.raises(ValidationError):
        density(np.zeros((1, 1)))


def test_adjacency_rules(rng):
    H = rng.normal(size=(12, 12)) * 0.02
    H = H + H.T
    a = adjacency(H, 1e-2)
    assert a.dtype == np.int8
    assert np.all(np.diag(a) == 0)
    np.testing.assert_array_equal(a, a.T)
    off = ~np.eye(12, dtype=bool)
    np.testing.assert_array_equal(a[off] == 1, np.abs(H)[off] > 1e-2)


def test_adjacency_symmetric_under_roundoff():
    H = np.array([[0, 0.0100000001], [0.0099999999, 0]])
    a = adjacency(H, 1e-2)
    np.testing.assert_array_equal(a, a.T)


def test_density_matches_networkx(rng):
    a = (rng.uniform(size=(30, 30)) < 0.3).astype(int)
    a = np.triu(a, 1)
    a = a + a.T
    assert density(a) == pytest.approx(nx.density(nx.from_numpy_array(a)))


def test_degree_histogram_pooled():
    a1 = adjacency(np.ones((4, 4)), 0.5)
    a2 = np.zeros((4, 4), dtype=np.int8)
    h = degree_distribution([a1, a2])
    np.testing.assert_array_equal(h.counts, [4, 0, 0, 4])
    assert h.mean == pytest.approx(1.5)
    assert h.variance == pytest.approx(2.25)
    assert h.probability.sum() == pytest.approx(1.0)
    merged = DegreeHistogram.empty(4).add(a1).merge(DegreeHistogram.empty(4).add(a2))
    np.testing.assert_array_equal(merged.counts, h.counts)


def test_summary():
    s = GraphSummary.of(adjacency(np.ones((3, 3)), 0.1))
    assert s.edge_count == 3
    np.testing.assert_array_equal(s.degrees, [2, 2, 2])


@pytest.fixture
def weighted(rng):
    H = rng.normal(size=(6, 6)) * 0.05 + 1j * rng.normal(size=(6, 6)) * 0.05
    H = H + H.conj().T
    return H, adjacency(H, 0.05)


def test_edge_csv_round_trip(tmp_path, weighted):
    H, a = weighted
    export_graph(a, tmp_path / "g.csv", H)
    b, w = read_edge_csv(tmp_path / "g.csv")
    np.testing.assert_array_equal(a, b)
    for (i, j), v in w.items():
        assert v == pytest.approx(abs(H[i - 1, j - 1]), rel=1e-15)


def test_graphml_valid(tmp_path, weighted):
    H, a = weighted
    labels = [f"|{l}>" for l in range(6)]
    export_graph(a, tmp_path / "g.graphml", H, labels=labels)
    g = nx.read_graphml(tmp_path / "g.graphml", node_type=int)
    assert g.number_of_nodes() == 6
    assert g.number_of_edges() == int(a.sum()) // 2
    assert g.nodes[1]["occupation"] == "|0>"
    for i, j, data in g.edges(data=True):
        assert data["weight"] == pytest.approx(abs(H[i - 1, j - 1]))


def test_dot_output(tmp_path, weighted):
    H, a = weighted
    path = export_graph(a, tmp_path / "g.dot", H)
    text = path.read_text()
    assert text.startswith("graph heff {")
    assert text.count(" -- ") == int(a.sum()) // 2


def test_export_errors(tmp_path):
    a = np.zeros((2, 2), dtype=np.int8)
    with pytest.raises(ValidationError):
        export_graph(a, tmp_path / "missing" / "g.dot")
    with pytest.raises(ValidationError):
        export_graph(a, tmp_path / "g.xyz")
