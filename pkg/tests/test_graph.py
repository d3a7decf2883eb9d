import itertools
import json

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covsel.graph import (
    Graph,
    NotDecomposableError,
    can_add,
    can_delete,
    decomposable_size_counts,
    enumerate_decomposable,
    flip_context,
    is_decomposable,
    is_perfect_sequence,
    legal_flip,
    legal_flip_bruteforce,
    maximal_cliques,
    perfect_sequence,
    split_sequence,
)


@st.composite
def graphs(draw, min_p=2, max_p=7):
    p = draw(st.integers(min_p, max_p))
    pairs = list(itertools.combinations(range(p), 2))
    bits = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Graph(p, frozenset(pr for pr, b in zip(pairs, bits) if b))


@st.composite
def decomposable_graphs(draw, min_p=2, max_p=7):
    g = draw(graphs(min_p, max_p))
    # drop edges until chordal; deterministic given the draw
    edges = sorted(g.edges)
    while not is_decomposable(g):
        g = g.flipped(*edges.pop())
    return g


def to_nx(g):
    h = nx.Graph()
    h.add_nodes_from(range(g.p))
    h.add_edges_from(g.edges)
    return h


class TestGraphType:
    def test_edges_normalized(self):
        g = Graph(4, frozenset({(0, 1), (2, 3)}))
        assert g.size == 2
        assert g.has_edge(1, 0)
        assert not g.has_edge(0, 2)

    def test_rejects_bad_edges(self):
        with pytest.raises(ValueError):
            Graph(3, frozenset({(1, 1)}))
        with pytest.raises(ValueError):
            Graph(3, frozenset({(0, 3)}))

    def test_json_roundtrip_is_one_based(self):
        g = Graph.chain(4)
        d = g.to_dict()
        assert d == {"p": 4, "edges": [[1, 2], [2, 3], [3, 4]]}
        assert Graph.from_dict(json.loads(json.dumps(d))) == g

    def test_bitstring_roundtrip(self):
        g = Graph.cycle(5)
        s = g.bitstring()
        assert len(s) == 10
        assert Graph.from_bitstring(5, s) == g

    def test_adjacency_matrix(self):
        a = Graph.complete(3).adjacency_matrix()
        np.testing.assert_array_equal(a, np.ones((3, 3)) - np.eye(3))
        assert Graph.from_matrix(a) == Graph.complete(3)

    def test_from_matrix_tolerance(self):
        a = np.eye(3)
        a[0, 1] = a[1, 0] = 1e-14
        assert Graph.from_matrix(a, tol=1e-10).size == 0
        assert Graph.from_matrix(a).size == 1


class TestDecomposability:
    def test_four_cycle_is_not_decomposable(self):
        assert not is_decomposable(Graph.cycle(4))
        with pytest.raises(NotDecomposableError):
            perfect_sequence(Graph.cycle(4))

    def test_triangle(self):
        assert is_decomposable(Graph.cycle(3))

    @settings(max_examples=300, deadline=None)
    @given(graphs())
    def test_matches_networkx(self, g):
        assert is_decomposable(g) == nx.is_chordal(to_nx(g))

    @settings(max_examples=200, deadline=None)
    @given(decomposable_graphs())
    def test_perfect_sequence_valid(self, g):
        seq = perfect_sequence(g)
        assert is_perfect_sequence(g, seq.cliques)
        assert sorted(map(frozenset, seq.cliques), key=sorted) == sorted(maximal_cliques(g), key=sorted)
        seen = set()
        for c, s in zip(seq.cliques, seq.separators):
            assert set(s) == seen & set(c)
            seen |= set(c)

    def test_empty_graph_sequence(self):
        seq = perfect_sequence(Graph.empty(3))
        assert seq.cliques == ((0,), (1,), (2,))
        assert seq.separators == ((), (), ())

    def test_is_perfect_sequence_rejects_bad_order(self):
        g = Graph(4, frozenset({(0, 1), (2, 3)}))
        assert is_perfect_sequence(g, [(0, 1), (2, 3)])
        chain = Graph.chain(4)
        assert not is_perfect_sequence(chain, [(0, 1), (2, 3), (1, 2)])
        assert not is_perfect_sequence(Graph.complete(3), [(0,), (1,), (2,)])


class TestLegalFlips:
    @settings(max_examples=300, deadline=None)
    @given(decomposable_graphs(min_p=3), st.data())
    def test_structural_tests_match_bruteforce(self, g, data):
        i, j = data.draw(st.sampled_from(list(itertools.combinations(range(g.p), 2))))
        assert legal_flip(g, i, j) == legal_flip_bruteforce(g, i, j)

    def test_chordless_cycle_closing_is_illegal(self):
        g = Graph.chain(4)
        assert not can_add(g, 0, 3)
        assert can_add(g, 0, 2)

    def test_delete_in_two_cliques(self):
        # edge (1,2) lies in triangles {0,1,2} and {1,2,3}
        g = Graph(4, frozenset({(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)}))
        assert not can_delete(g, 1, 2)
        assert can_delete(g, 0, 1)

    def test_flip_context_delete(self):
        g = Graph.complete(4)
        seq = perfect_sequence(g)
        ctx = flip_context(g, seq, 1, 3)
        assert ctx.clique == (0, 1, 2, 3)
        assert ctx.separator == (0, 2)
        assert ctx.clique1 == (0, 1, 2) and ctx.clique2 == (0, 2, 3)

    def test_flip_context_add_uses_new_graph(self):
        g = Graph.chain(3)
        ctx = flip_context(g, None, 0, 2)
        assert ctx.clique == (0, 1, 2) and ctx.separator == (1,)

    def test_flip_context_errors(self):
        g = Graph(4, frozenset({(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)}))
        with pytest.raises(ValueError):
            flip_context(g, perfect_sequence(g), 1, 2)
        with pytest.raises(ValueError):
            flip_context(Graph.chain(4), None, 0, 3)

    @settings(max_examples=200, deadline=None)
    @given(decomposable_graphs(min_p=3), st.data())
    def test_split_sequence_is_perfect_for_smaller_graph(self, g, data):
        deletable = [e for e in sorted(g.edges) if can_delete(g, *e)]
        if not deletable:
            return
        i, j = data.draw(st.sampled_from(deletable))
        seq = perfect_sequence(g)
        ctx = flip_context(g, seq, i, j)
        assert is_perfect_sequence(g.flipped(i, j), split_sequence(seq, ctx))


class TestEnumeration:
    @pytest.mark.parametrize("p,total", [(1, 1), (2, 2), (3, 8), (4, 61), (5, 822), (6, 18154)])
    def test_totals(self, p, total):
        assert sum(decomposable_size_counts(p)) == total

    def test_all_distinct_and_decomposable(self):
        gs = list(enumerate_decomposable(5))
        assert len(set(gs)) == len(gs) == 822
        assert all(nx.is_chordal(to_nx(g)) for g in gs)

    def test_p4_by_size(self):
        assert decomposable_size_counts(4) == [1, 6, 15, 20, 12, 6, 1]

    def test_guard(self):
        with pytest.raises(ValueError):
            list(enumerate_decomposable(8))
