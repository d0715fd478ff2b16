import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latpat.errors import (
    DisconnectedGraphError,
    DuplicateEdgeError,
    EdgeListFormatError,
    IndexOutOfRangeError,
    SelfLoopError,
)
from latpat.graphs import (
    bipartition,
    build_graph,
    cartesian_product,
    complete_bipartite,
    cycle_graph,
    grid_graph,
    parse_edge_list,
    path_graph,
    random_connected_bipartite,
    random_connected_graph,
    random_walk_matrix,
    read_edge_list,
    spectrum,
    write_edge_list,
)


def test_build_graph_smallest():
    g = build_graph(2, [(0, 1)])
    assert g.degrees == (1, 1)
    assert g.edges == ((0, 1),)


def test_build_graph_cycle4():
    g = build_graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert g.degrees == (2, 2, 2, 2)


def test_build_graph_rejects_disconnected():
    with pytest.raises(DisconnectedGraphError):
        build_graph(3, [(0, 1)])


def test_build_graph_rejects_self_loop():
    with pytest.raises(SelfLoopError):
        build_graph(3, [(0, 1), (1, 1), (1, 2)])


def test_build_graph_rejects_duplicates_and_reversed():
    with pytest.raises(DuplicateEdgeError):
        build_graph(3, [(0, 1), (1, 2), (1, 0)])


def test_build_graph_rejects_bad_index():
    with pytest.raises(IndexOutOfRangeError):
        build_graph(3, [(0, 1), (1, 3)])


def test_generators_match_explicit_graphs():
    assert path_graph(2).edges == build_graph(2, [(0, 1)]).edges
    assert cycle_graph(3).edges == ((0, 1), (0, 2), (1, 2))


def test_grid_2x2_isomorphic_to_cycle4():
    g = grid_graph(2, 2)
    relabel = {0: 0, 1: 1, 3: 2, 2: 3}
    mapped = {tuple(sorted((relabel[i], relabel[j]))) for i, j in g.edges}
    assert mapped == set(cycle_graph(4).edges)


def test_cartesian_product_matches_definition():
    g = cartesian_product(path_graph(2), path_graph(3))
    # nodes (i, j) -> 3 i + j; edges by the product rule
    expected = set()
    for i in range(2):
        for j in range(2):
            expected.add((3 * i + j, 3 * i + j + 1))
    for j in range(3):
        expected.add((j, 3 + j))
    assert g.node_count == 6
    assert g.edge_count == 7
    assert set(g.edges) == expected
    assert set(grid_graph(2, 3).edges) == expected


def test_random_walk_matrix_examples():
    assert np.array_equal(random_walk_matrix(path_graph(2)),
                          np.array([[0.0, 1.0], [1.0, 0.0]]))
    p3 = random_walk_matrix(path_graph(3))
    assert np.allclose(p3[1], [0.5, 0.0, 0.5])
    c3 = random_walk_matrix(cycle_graph(3))
    assert np.allclose(c3, (np.ones((3, 3)) - np.eye(3)) / 2.0)


def test_spectrum_path2():
    spec = spectrum(path_graph(2))
    assert np.allclose(spec.eigenvalues, [1.0, -1.0], atol=1e-12)
    v2 = spec.eigenvectors[:, 1]
    assert abs(abs(v2[0]) - abs(v2[1])) < 1e-12
    assert v2[0] * v2[1] < 0


def test_spectrum_cycles_match_analytic_values():
    # eigenvalues of a cycle's averaging matrix are cos(2 pi k / N)
    for n in (3, 4, 5, 6):
        expected = sorted((np.cos(2.0 * np.pi * k / n) for k in range(n)),
                          reverse=True)
        got = spectrum(cycle_graph(n)).eigenvalues
        assert np.allclose(got, expected, atol=1e-9)


def test_spectrum_eigenpair_residuals():
    rng = np.random.default_rng(7)
    for _ in range(20):
        g = random_connected_graph(int(rng.integers(2, 16)), rng)
        spec = spectrum(g)
        for k in range(g.node_count):
            res = spec.matrix @ spec.eigenvectors[:, k] - \
                spec.eigenvalues[k] * spec.eigenvectors[:, k]
            assert np.max(np.abs(res)) <= 1e-8


def test_bipartition_examples():
    bp = bipartition(cycle_graph(4))
    assert bp.set_a == (0, 2) and bp.set_b == (1, 3)
    assert bipartition(cycle_graph(5)) is None
    kb = complete_bipartite(2, 3)
    bp = bipartition(kb)
    assert sorted(map(len, (bp.set_a, bp.set_b))) == [2, 3]
    assert abs(spectrum(kb).lambda_min + 1.0) < 1e-9


def test_bipartite_iff_lambda_min_minus_one():
    rng = np.random.default_rng(11)
    for i in range(20):
        n = int(rng.integers(2, 20))
        g = (random_connected_bipartite(n, rng) if i % 2 == 0
             else random_connected_graph(n, rng))
        spec = spectrum(g)
        is_bip = bipartition(g) is not None
        assert is_bip == (abs(spec.lambda_min + 1.0) <= 1e-9)
        if is_bip:
            v = spec.mode_min
            for a, b in g.edges:
                assert v[a] * v[b] < 0


@settings(max_examples=25, deadline=None)
@given(na=st.integers(2, 5), nb=st.integers(2, 5), seed=st.integers(0, 10_000))
def test_product_of_bipartite_graphs_is_bipartite(na, nb, seed):
    rng = np.random.default_rng(seed)
    g = random_connected_bipartite(na, rng)
    h = random_connected_bipartite(nb, rng)
    assert bipartition(cartesian_product(g, h)) is not None


def test_edge_list_roundtrip(tmp_path):
    g = grid_graph(2, 3)
    path = tmp_path / "grid.txt"
    write_edge_list(g, path)
    back = read_edge_list(path)
    assert back.edges == g.edges and back.node_count == g.node_count


def test_edge_list_comments_and_errors():
    g = parse_edge_list("# a comment\n2 1\n0 1  # trailing\n")
    assert g.edges == ((0, 1),)
    with pytest.raises(EdgeListFormatError) as err:
        parse_edge_list("2 1\n0 1 2\n")
    assert "line 2" in str(err.value)
    with pytest.raises(EdgeListFormatError):
        parse_edge_list("3 2\n0 1\n")
    with pytest.raises(DuplicateEdgeError) as err:
        parse_edge_list("2 2\n0 1\n1 0\n")
    assert "line 3" in str(err.value)


def test_row_stochastic_property():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = random_connected_graph(int(rng.integers(2, 24)), rng)
        p = random_walk_matrix(g)
        assert np.max(np.abs(p.sum(axis=1) - 1.0)) <= 1e-12
        assert np.all(p >= 0.0)
