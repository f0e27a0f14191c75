import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coopreg.errors import DegenerateNode, DimensionMismatch
from coopreg.graph import (
    AugmentedGraph,
    check_lemma1,
    check_lemma2,
    graph_matrices,
    has_spanning_tree_from_leader,
)

from gen import random_graph


def bfs_oracle(adj, k):
    """Reachability by repeated boolean matrix powers."""
    N = len(k)
    reach = np.asarray(k) > 0
    M = np.asarray(adj) > 0
    for _ in range(N):
        reach = reach | (M.astype(int) @ reach.astype(int) > 0)
    return bool(reach.all())


def test_chain_of_two_reachable():
    g = AugmentedGraph([[0, 0], [1, 0]], [1, 0])
    assert has_spanning_tree_from_leader(g)


def test_disconnected_follower_unreachable():
    g = AugmentedGraph(np.zeros((2, 2)), [1, 0])
    assert not has_spanning_tree_from_leader(g)


def test_standin_graph_reachable(ex1):
    g = ex1.graph
    assert g.leader_gains[0] == 1 and g.leader_gains[1] == 1
    assert has_spanning_tree_from_leader(g)
    assert bfs_oracle(g.adjacency, g.leader_gains)


def test_single_follower():
    gm = graph_matrices(AugmentedGraph([[0]], [1]), p=1)
    assert gm.F.tolist() == [[1.0]]
    assert gm.IminusFA.tolist() == [[1.0]]
    assert gm.rho_FA == 0.0
    assert check_lemma1(gm)


def test_acyclic_graph_has_zero_radius():
    # strictly lower-triangular adjacency is acyclic
    adj = np.tril(np.ones((4, 4)), -1)
    gm = graph_matrices(AugmentedGraph(adj, [1, 0, 0, 0]), p=2)
    assert gm.rho_FA == pytest.approx(0.0, abs=1e-12)


def test_two_node_cycle():
    gm = graph_matrices(AugmentedGraph([[0, 1], [1, 0]], [1, 0]), p=1)
    np.testing.assert_allclose(gm.F, np.diag([0.5, 1.0]))
    np.testing.assert_allclose(gm.FA, [[0, 0.5], [1, 0]])
    assert gm.rho_FA == pytest.approx(1 / np.sqrt(2), rel=1e-12)
    ev = np.sort(np.linalg.eigvals(gm.IminusFA).real)
    np.testing.assert_allclose(ev, [1 - 1 / np.sqrt(2), 1 + 1 / np.sqrt(2)], rtol=1e-12)
    assert check_lemma1(gm) and check_lemma2(gm)


def test_standin_radius(ex1):
    # FA has the single cycle 2 -> 3 -> 2 with weights 1/2 and 1/2
    gm = graph_matrices(ex1.graph, p=1)
    assert gm.rho_FA == pytest.approx(0.5, rel=1e-12)


def test_kron_dimension():
    gm = graph_matrices(AugmentedGraph([[0, 1], [1, 0]], [1, 0]), p=3)
    assert gm.W.shape == (6, 6)
    np.testing.assert_array_equal(gm.W, np.kron(gm.IminusFA, np.eye(3)))


def test_degenerate_node():
    g = AugmentedGraph([[0, 0], [0, 0]], [1, 0])
    with pytest.raises(DegenerateNode, match="follower\\(s\\) 2"):
        graph_matrices(g, p=1)


@pytest.mark.parametrize(
    "adj, k, exc",
    [
        ([[0, 1]], [1], DimensionMismatch),
        ([[0, 1], [1, 0]], [1], DimensionMismatch),
        ([[0, -1], [1, 0]], [1, 0], ValueError),
        ([[1, 0], [1, 0]], [1, 0], ValueError),
        ([[0, np.nan], [1, 0]], [1, 0], ValueError),
    ],
)
def test_malformed_graph(adj, k, exc):
    with pytest.raises(exc):
        AugmentedGraph(adj, k)


def test_graph_is_immutable():
    g = AugmentedGraph([[0, 1], [1, 0]], [1, 0])
    with pytest.raises(ValueError):
        g.adjacency[0, 1] = 5.0


def test_from_row_stochastic():
    Q = np.array([[1, 0, 0], [0.5, 0, 0.5], [0, 1, 0]])
    g = AugmentedGraph.from_row_stochastic(Q)
    np.testing.assert_array_equal(g.leader_gains, [0.5, 0])
    gm = graph_matrices(g, p=1)
    np.testing.assert_allclose(gm.F, np.eye(2))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 12))
def test_graph_lemmas_property(seed, N):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, N, density=rng.uniform(0.05, 0.8))
    assert has_spanning_tree_from_leader(g) == bfs_oracle(g.adjacency, g.leader_gains)
    gm = graph_matrices(g, p=int(rng.integers(1, 4)))
    assert check_lemma1(gm)
    assert check_lemma2(gm)
    # rows of FA plus F k sum to one
    np.testing.assert_allclose(gm.FA.sum(axis=1) + gm.F @ g.leader_gains, 1.0, atol=1e-12)
    assert np.linalg.svd(gm.W, compute_uv=False).min() > 1e-10


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 10))
def test_reachability_matches_oracle(seed, N):
    rng = np.random.default_rng(seed)
    adj = (rng.random((N, N)) < 0.25) * 1.0
    np.fill_diagonal(adj, 0)
    k = (rng.random(N) < 0.2) * 1.0
    assert has_spanning_tree_from_leader(AugmentedGraph(adj, k)) == bfs_oracle(adj, k)
