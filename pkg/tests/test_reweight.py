import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cofree.graph import Graph
from cofree.partition import VertexCutPartition, vertex_cut
from cofree.reweight import compute_weights, dar_weights, unit_weights, vanilla_inv_weights
from conftest import random_graph


def weight_of(weights, part, node):
    return {q.index: float(w[np.searchsorted(q.nodes, node)])
            for q, w in zip(part.parts, weights.values) if node in q.nodes}


def star4_split():
    g, _ = Graph.from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)])
    return g, VertexCutPartition.from_assignment(5, g.edges, [0, 0, 0, 1], 2)


def test_dar_split_three_one():
    g, part = star4_split()
    assert weight_of(dar_weights(g, part), part, 0) == {0: 0.75, 1: 0.25}
    assert weight_of(dar_weights(g, part), part, 1) == {0: 1.0}


def test_vanilla_inv():
    g, part = star4_split()
    w = vanilla_inv_weights(part)
    assert weight_of(w, part, 0) == {0: 0.5, 1: 0.5}
    assert weight_of(w, part, 4) == {1: 1.0}


def test_unit_weights_totals_equal_rf():
    g, part = star4_split()
    assert unit_weights(part).totals(part).tolist() == [2, 1, 1, 1, 1]


def test_schemes_coincide_at_p1(sbm):
    part = vertex_cut(sbm, "random", 1)
    for s in ("dar", "vanilla-inv", "none"):
        for w in compute_weights(s, sbm, part).values:
            np.testing.assert_array_equal(w, 1.0)


def test_unknown_scheme(sbm):
    with pytest.raises(ValueError):
        compute_weights("bogus", sbm, vertex_cut(sbm, "random", 2))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(0, 120), st.integers(1, 8), st.integers(0, 999),
       st.sampled_from(["random", "dbh", "ne", "edge_cut"]))
def test_weights_sum_to_one(n, m, p, seed, algo):
    g = random_graph(n, m, seed)
    part = vertex_cut(g, algo, p, seed)
    for w in (dar_weights(g, part), vanilla_inv_weights(part)):
        np.testing.assert_allclose(w.totals(part), 1.0, rtol=0, atol=1e-12)
