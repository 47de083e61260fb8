import numpy as np
import pytest

from ssmclab.graph import WeightedGraph, make_comb, make_full_binary_tree, make_waterfall
from ssmclab.gww import GwwState, gww_star_step, gww_variant_step, run_gww


def test_run_terminates_on_a_leaf():
    g = make_comb(4)
    out, positions = run_gww(g, 8, 123)
    assert g.is_leaf(out)
    assert positions.size == 8
    assert all(g.is_leaf(int(v)) for v in positions)


def test_run_is_seed_deterministic():
    g = make_waterfall(6)
    out_a, pos_a = run_gww(g, 16, 5)
    out_b, pos_b = run_gww(g, 16, 5)
    assert out_a == out_b
    assert np.array_equal(pos_a, pos_b)


def test_step_advances_one_layer():
    g = make_full_binary_tree(3)
    s = GwwState.at_root(g, 30, 1)
    nxt = gww_star_step(s, g)
    assert isinstance(nxt, GwwState)
    assert all(g.depth[int(v)] == 1 for v in nxt.positions)


def test_all_leaves_returns_an_output_vertex():
    g = make_full_binary_tree(1)
    leaf = g.layer(1)[0]
    s = GwwState(positions=np.full(5, leaf), rng=np.random.default_rng(0))
    assert gww_star_step(s, g) == leaf
    s = GwwState(positions=np.full(5, leaf), rng=np.random.default_rng(0))
    assert gww_variant_step(s, g) == leaf


def test_uniform_child_selection_frequencies():
    g = make_full_binary_tree(1)
    s = GwwState.at_root(g, 20000, 7)
    nxt = gww_star_step(s, g)
    counts = np.bincount(nxt.positions, minlength=g.n)
    left, right = g.children(0)
    assert abs(counts[left] / 20000 - 0.5) < 0.02
    assert counts[left] + counts[right] == 20000


def test_stranded_walkers_follow_movers():
    # root -> a -> c, with b a dead-end at depth 1: walkers stuck at b must
    # land on c, the only position reachable by a mover
    g = WeightedGraph(
        n=4,
        edges=((0, 1, 1.0), (0, 2, 1.0), (1, 3, 1.0)),
        height=(2, 1, 1, 0),
        depth=(0, 1, 1, 2),
        target=3,
    )
    s = GwwState(positions=np.array([1, 2, 2, 2]), rng=np.random.default_rng(0))
    nxt = gww_star_step(s, g)
    assert np.all(nxt.positions == 3)
    s = GwwState(positions=np.array([1, 2, 2, 2]), rng=np.random.default_rng(0))
    nxt = gww_variant_step(s, g)
    assert np.all(nxt.positions == 3)


def test_variant_jump_is_node_uniform():
    # two movers at a, one at b; a has 1 child, b has 1 child; 100 stranded
    # walkers at dead-end d.  Node-uniform jumps split ~50/50 between the two
    # occupied children even though a contributes twice the walkers.
    g = WeightedGraph(
        n=7,
        edges=((0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (1, 4, 1.0), (2, 5, 1.0)),
        height=(2, 1, 1, 1, 0, 0, 0),
        depth=(0, 1, 1, 1, 2, 2, 2),
        target=4,
    )
    strandees = 4000
    positions = np.array([1, 1, 1, 2] + [3] * strandees)
    s = GwwState(positions=positions, rng=np.random.default_rng(9))
    nxt = gww_variant_step(s, g)
    landed = nxt.positions[4:]
    frac4 = np.mean(landed == 4)
    assert abs(frac4 - 0.5) < 0.05

    s = GwwState(positions=positions.copy(), rng=np.random.default_rng(9))
    nxt = gww_star_step(s, g)
    landed = nxt.positions[4:]
    # walker-uniform jumps weight children by mover counts (3/4 vs 1/4)
    assert abs(np.mean(landed == 4) - 0.75) < 0.05


def test_run_respects_step_limit():
    g = make_comb(4)
    with pytest.raises(RuntimeError):
        run_gww(g, 4, 0, max_steps=1)
