import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssmclab.graph import (
    GraphError,
    WeightedGraph,
    laplacian,
    load_graph,
    make_comb,
    make_full_binary_tree,
    make_hypercube,
    make_random_tree,
    make_waterfall,
    save_graph,
    stage_subgraph,
)


def test_rejects_self_loop():
    with pytest.raises(GraphError):
        WeightedGraph(n=2, edges=((0, 0, 1.0),), height=(0, 0))


def test_rejects_nonpositive_weight():
    with pytest.raises(GraphError):
        WeightedGraph(n=2, edges=((0, 1, 0.0),), height=(0, 0))


def test_rejects_duplicate_edge():
    with pytest.raises(GraphError):
        WeightedGraph(n=2, edges=((0, 1, 1.0), (1, 0, 2.0)), height=(0, 0))


def test_rejects_depth_skipping_edge():
    with pytest.raises(GraphError):
        WeightedGraph(n=2, edges=((0, 1, 1.0),), height=(0, 0), depth=(0, 2))


def test_children_ordering_and_leaves():
    g = make_full_binary_tree(2)
    assert g.children(0) == (1, 2)
    assert not g.is_leaf(0)
    assert all(g.is_leaf(v) for v in g.layer(2))


def test_laplacian_columns_sum_to_zero_exactly():
    g = make_random_tree(3, np.random.default_rng(7))
    m = laplacian(g).matrix
    assert m.shape == (g.n, g.n)
    assert np.max(np.abs(m.sum(axis=0))) <= 1e-12
    assert np.array_equal(m, m.T)


def test_laplacian_restricted_support_drops_external_edges():
    g = make_full_binary_tree(2)
    sub = laplacian(g, support=[0, 1])
    w = g.edge_weight(0, 1)
    assert np.allclose(sub.matrix, [[w, -w], [-w, w]])


def test_stage_subgraph_uses_only_interlayer_edges():
    g = make_comb(4)
    lap = stage_subgraph(g, 2)
    assert set(lap.support) == set(g.layer(1)) | set(g.layer(2))
    # every nonzero off-diagonal entry pairs a depth-1 and a depth-2 vertex
    for a, va in enumerate(lap.support):
        for b, vb in enumerate(lap.support):
            if a != b and lap.matrix[a, b] != 0:
                assert {g.depth[va], g.depth[vb]} == {1, 2}


def test_stage_subgraph_range_checks():
    g = make_comb(3)
    with pytest.raises(GraphError):
        stage_subgraph(g, 0)
    with pytest.raises(GraphError):
        stage_subgraph(g, 99)


def test_comb_structure():
    D = 5
    g = make_comb(D)
    # spine of D+1, one long tooth of D-1, and D-1 unit teeth
    assert g.n == (D + 1) + (D - 1) + (D - 1)
    assert g.depth[g.target] == D
    assert g.height[g.target] == 0
    # the long tooth and the unit tooth from spine depth D-2 both dead-end
    # at depth D-1
    dead_ends = [v for v in g.layer(D - 1) if g.is_leaf(v)]
    assert len(dead_ends) == 2


def test_comb_custom_teeth_validation():
    with pytest.raises(GraphError):
        make_comb(4, {0: 99})
    with pytest.raises(GraphError):
        make_comb(4, {7: 1})


def test_waterfall_structure():
    D = 6
    g = make_waterfall(D)
    # exactly two vertices reach the final layer: the target and its sibling
    assert len(g.layer(D)) == 2
    assert g.target in g.layer(D)
    # every other branch dead-ends exactly at depth D-1
    for v in g.layer(D - 1):
        kids = g.children(v)
        assert kids == () or g.depth[kids[0]] == D
    # above the last two layers, the spine vertex forks and every tooth
    # vertex continues straight down
    for j in range(D - 1):
        fanouts = sorted(len(g.children(v)) for v in g.layer(j))
        assert fanouts == [1] * (len(fanouts) - 1) + [2]


def test_hypercube_layers_and_degrees():
    g = make_hypercube(3)
    assert g.n == 8
    assert len(g.edges) == 12
    assert np.all(g.degrees() == 3)
    assert g.height == tuple(bin(v).count("1") for v in range(8))
    assert g.target == 0


def test_hypercube_cap():
    with pytest.raises(GraphError):
        make_hypercube(40)


def test_save_load_round_trip(tmp_path):
    g = make_random_tree(3, np.random.default_rng(3))
    path = tmp_path / "g.json"
    save_graph(g, path)
    h = load_graph(path)
    assert h.n == g.n
    assert h.edges == g.edges
    assert h.height == g.height
    assert h.depth == g.depth
    assert h.target == g.target


def test_load_rejects_sparse_ids(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(
        json.dumps(
            {
                "vertices": [{"id": 0, "height": 1}, {"id": 2, "height": 0}],
                "edges": [],
                "target": None,
            }
        )
    )
    with pytest.raises(GraphError):
        load_graph(path)


@settings(max_examples=25, deadline=None)
@given(depth=st.integers(2, 5), seed=st.integers(0, 2**32 - 1))
def test_random_tree_is_properly_layered(depth, seed):
    g = make_random_tree(depth, np.random.default_rng(seed))
    assert g.max_depth == depth
    for u, v, w in g.edges:
        assert abs(g.depth[u] - g.depth[v]) == 1
        assert 0.5 <= w <= 2.0
    # heights decrease one per layer down to zero
    for v in g.vertices:
        assert g.height[v] == depth - g.depth[v]
