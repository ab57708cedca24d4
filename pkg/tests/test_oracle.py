import itertools
from math import comb

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from canoncount.canonical import DepthError
from canoncount.graph import DisconnectedGraphError, Graph, GraphBoundError, assign_indices, enumerate_queries
from canoncount.oracle import (
    CountOverflowError,
    CountTable,
    _to_int64,
    canonical_count,
    canonical_counts,
    connected_subsets,
    count_all,
    count_subgraphs,
    ground_truth_counts,
    ground_truth_table,
    read_totals_csv,
    verify_decomposition,
)

from conftest import P3, TRIANGLE, complete, path, random_graph, star


def _to_nx(g):
    h = nx.Graph()
    h.add_nodes_from(range(g.num_nodes))
    h.add_edges_from(g.edges)
    return h


def brute_count(query, target):
    """Independent reference: all k-subsets, networkx isomorphism."""
    q = _to_nx(query)
    t = _to_nx(target)
    return sum(
        1 for sub in itertools.combinations(range(target.num_nodes), query.num_nodes)
        if nx.is_isomorphic(t.subgraph(sub), q)
    )


def brute_canonical(query, target, v):
    q = _to_nx(query)
    t = _to_nx(target)
    idx = target.node_index
    n = 0
    for sub in itertools.combinations(range(target.num_nodes), query.num_nodes):
        if max(sub, key=lambda u: idx[u]) == v and nx.is_isomorphic(t.subgraph(sub), q):
            n += 1
    return n


# --- spec examples ------------------------------------------------------

def test_triangle_counts():
    assert count_subgraphs(TRIANGLE, complete(3)) == 1
    assert count_subgraphs(TRIANGLE, complete(4)) == 4
    assert count_subgraphs(P3, complete(3)) == 0


def test_canonical_count_examples():
    k3 = complete(3)
    assert [canonical_count(TRIANGLE, k3, v) for v in range(3)] == [0, 0, 1]
    p = path(3)
    assert [canonical_count(P3, p, v) for v in range(3)] == [0, 0, 1]
    s = star(3, [0, 1, 2])
    assert canonical_count(P3, s, 3) == 3
    assert [canonical_count(P3, s, v) for v in range(3)] == [0, 0, 0]


def test_ground_truth_k3(standard_queries):
    table = ground_truth_table(standard_queries, complete(3), 4)
    totals = table.totals()[0]
    tri = next(i for i, q in enumerate(standard_queries) if q.num_nodes == 3 and q.num_edges == 3)
    path_q = next(i for i, q in enumerate(standard_queries) if q.num_nodes == 3 and q.num_edges == 2)
    assert totals[tri] == 1 and totals[path_q] == 0
    assert set(totals.tolist()) <= {0, 1}


def test_ground_truth_edgeless(standard_queries):
    assert not ground_truth_counts(standard_queries, Graph(6), 4).any()


def test_verify_decomposition_examples(rng):
    assert verify_decomposition(TRIANGLE, complete(4), 1)
    g = assign_indices(random_graph(rng, 10, 0.3), 1)
    assert verify_decomposition(P3, g, 2)
    with pytest.raises(DepthError):
        verify_decomposition(path(5), g, 3)


def test_ground_truth_rejects_shallow_depth(standard_queries):
    with pytest.raises(DepthError):
        ground_truth_counts(standard_queries, complete(4), 3)


def test_query_preconditions():
    with pytest.raises(DisconnectedGraphError):
        count_subgraphs(Graph(3, ((0, 1),)), complete(4))
    with pytest.raises(GraphBoundError):
        count_subgraphs(path(9), path(10))


def test_overflow_is_an_error():
    with pytest.raises(CountOverflowError):
        _to_int64([2**63])


# --- against independent brute force ------------------------------------

def test_counts_match_brute_force(rng, standard_queries):
    for _ in range(6):
        g = random_graph(rng, int(rng.integers(5, 9)), float(rng.uniform(0.2, 0.7)))
        got = count_all(standard_queries, g)
        want = [brute_count(q, g) for q in standard_queries]
        assert got.tolist() == want


def test_canonical_counts_match_brute_force(rng):
    queries = enumerate_queries(3, 4)
    for seed in range(4):
        g = assign_indices(random_graph(rng, 7, 0.5), seed)
        got = canonical_counts(queries, g)
        for v in range(g.num_nodes):
            assert got[v].tolist() == [brute_canonical(q, g, v) for q in queries]


def test_subset_enumeration_visits_each_subset_once(rng):
    for _ in range(10):
        g = random_graph(rng, int(rng.integers(4, 10)), float(rng.uniform(0.1, 0.8)))
        h = _to_nx(g)
        for k in range(1, 6):
            subs = [frozenset(s) for s in connected_subsets(g, k)]
            assert len(subs) == len(set(subs))
            brute = sum(1 for s in itertools.combinations(range(g.num_nodes), k)
                        if nx.is_connected(h.subgraph(s)))
            assert len(subs) == brute <= comb(g.num_nodes, k)


def test_complete_graph_no_automorphism_multiplicity():
    # K5 has 5!/... automorphic embeddings of a triangle; the oracle must report C(5,3)
    assert count_subgraphs(TRIANGLE, complete(5)) == comb(5, 3)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 9), st.floats(0.1, 0.7), st.integers(0, 2**32 - 1))
def test_decomposition_identities_property(n, density, seed):
    rng = np.random.default_rng(seed)
    g = assign_indices(random_graph(rng, n, density), seed)
    queries = enumerate_queries(3, 4)
    total = count_all(queries, g)
    whole = canonical_counts(queries, g).sum(axis=0)
    local = ground_truth_counts(queries, g, 4).sum(axis=0)
    assert total.tolist() == whole.tolist() == local.tolist()


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 8), st.integers(0, 2**32 - 1))
def test_permutation_covariance(n, seed):
    rng = np.random.default_rng(seed)
    g = assign_indices(random_graph(rng, n, 0.5), seed)
    perm = [int(x) for x in rng.permutation(n)]
    moved = g.relabel(perm)  # node_index travels with the nodes
    queries = enumerate_queries(3, 4)
    a = canonical_counts(queries, g)
    b = canonical_counts(queries, moved)
    for v in range(n):
        assert a[v].tolist() == b[perm[v]].tolist()


# --- CountTable ---------------------------------------------------------------

def test_count_table_csv_round_trip(tmp_path, standard_queries):
    table = CountTable(len(standard_queries))
    table.add(0, ground_truth_counts(standard_queries, complete(4), 4))
    table.add(3, ground_truth_counts(standard_queries, path(5), 4))
    table.to_csv(tmp_path / "c.csv")
    table.totals_to_csv(tmp_path / "t.csv")
    back = CountTable.from_csv(tmp_path / "c.csv")
    assert back.is_integer
    assert set(back.counts) == {0, 3}
    for gid in (0, 3):
        assert np.array_equal(back.counts[gid], table.counts[gid])
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "graph_id,node_id,query_id,count"
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "graph_id,query_id,total"
    totals = read_totals_csv(tmp_path / "t.csv")
    for gid, tot in table.totals().items():
        for q, t in enumerate(tot):
            assert totals[(gid, q)] == t


def test_count_table_real_values(tmp_path):
    table = CountTable(2)
    table.add(0, np.array([[0.5, 1.25], [2.0, 0.0]]))
    table.to_csv(tmp_path / "c.csv")
    back = CountTable.from_csv(tmp_path / "c.csv")
    assert not back.is_integer
    assert np.array_equal(back.counts[0], table.counts[0])


def test_count_table_shape_check():
    with pytest.raises(ValueError):
        CountTable(3).add(0, np.zeros((2, 2)))
