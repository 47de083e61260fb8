import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssmclab.graph import make_full_binary_tree, make_random_tree
from ssmclab.process import (
    DistributionVector,
    ExtinctionError,
    ProcessError,
    Schedule,
    closed_form_pair,
    evolve_exact,
    limit_step,
    run_staged_exact,
    stage_generator,
    tv_distance,
)


def two_level_oracle(E, w, t):
    """Independent 2x2 reference: diagonalize the generator directly."""
    h = np.array([[E + w, -w], [-w, w]])
    vals, vecs = np.linalg.eigh(h)
    p = vecs @ np.diag(np.exp(-vals * t)) @ vecs.T @ np.array([1.0, 0.0])
    return p[0], p[1]


def test_distribution_vector_validates_mass():
    with pytest.raises(ProcessError):
        DistributionVector(mass={0: 0.7})
    with pytest.raises(ProcessError):
        DistributionVector(mass={0: -0.2, 1: 1.2})


def test_renormalized_conditions_on_survival():
    d = DistributionVector(mass={0: 0.2, 1: 0.3}, cemetery=0.5)
    r = d.renormalized()
    assert r.cemetery == 0.0
    assert math.isclose(r.mass[0], 0.4)
    assert math.isclose(r.mass[1], 0.6)


def test_renormalized_raises_on_extinction():
    d = DistributionVector(mass={}, cemetery=1.0)
    with pytest.raises(ExtinctionError):
        d.renormalized()


@pytest.mark.parametrize("E", [1.0, 10.0, 100.0])
@pytest.mark.parametrize("w", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("t", [0.1, 0.5, 1.0])
def test_closed_form_pair_matches_spectral_oracle(E, w, t):
    p_stay, p_child = closed_form_pair(E, w, t)
    o_stay, o_child = two_level_oracle(E, w, t)
    assert abs(p_stay - o_stay) < 1e-12
    assert abs(p_child - o_child) < 1e-12


def test_closed_form_pair_rejects_bad_arguments():
    with pytest.raises(ProcessError):
        closed_form_pair(0.0, 1.0, 0.5)
    with pytest.raises(ProcessError):
        closed_form_pair(1.0, 1.0, 2.0)


def test_evolve_exact_pure_diffusion_conserves_mass():
    # a Laplacian alone has zero column sums, so nothing dies
    h = np.array([[1.0, -1.0], [-1.0, 1.0]])
    psi = evolve_exact(DistributionVector.delta(0), h, (0, 1), 0.7)
    assert psi.cemetery < 1e-12
    assert math.isclose(psi.surviving_mass(), 1.0, abs_tol=1e-12)


def test_evolve_exact_rejects_bad_input():
    with pytest.raises(ProcessError):
        evolve_exact(DistributionVector.delta(0), np.array([[1.0]]), (0,), -1.0)
    with pytest.raises(ProcessError):
        evolve_exact(DistributionVector.delta(0), np.array([[np.nan]]), (0,), 1.0)


def test_stage_generator_objective_ramp():
    g = make_full_binary_tree(2)
    E = 10.0
    h, support = stage_generator(g, 2, E)
    assert support == tuple(g.vertices)
    # the root is one stage behind (objective 2E, no active edges), layer 1
    # carries E plus its stage degree, and layer 2 only its stage degree
    assert h[0, 0] == pytest.approx(2 * E)
    for v in g.layer(1):
        assert h[v, v] == pytest.approx(E + len(g.children(v)))
    for v in g.layer(2):
        assert h[v, v] == pytest.approx(1.0)


def test_run_staged_exact_rejects_deep_start():
    g = make_full_binary_tree(3)
    deep = g.layer(2)[0]
    with pytest.raises(ProcessError):
        run_staged_exact(g, 10.0, psi0=DistributionVector.delta(deep))


def test_run_staged_exact_shift_invariance():
    g = make_full_binary_tree(3)
    base = run_staged_exact(g, 100.0)[-1]
    shifted = run_staged_exact(g, 100.0, shift=3.0)[-1]
    assert tv_distance(base.mass, shifted.mass) < 1e-9


def test_run_staged_exact_mass_lives_in_reachable_layers():
    g = make_full_binary_tree(3)
    laws = run_staged_exact(g, 50.0)
    for j, law in enumerate(laws, start=1):
        reachable = {v for d in range(j + 1) for v in g.layer(d)}
        occupied = {v for v, p in law.mass.items() if p > 1e-15}
        assert occupied <= reachable


def test_limit_step_uniform_on_equal_weights():
    g = make_full_binary_tree(2)
    out = limit_step({0: 1.0}, g)
    assert set(out) == set(g.layer(1))
    assert all(math.isclose(p, 0.5) for p in out.values())


def test_limit_step_weights_children_by_w_exp_minus_w():
    g = make_random_tree(1, np.random.default_rng(11))
    out = limit_step({0: 1.0}, g)
    raw = {y: g.edge_weight(0, y) * math.exp(-g.edge_weight(0, y)) for y in g.children(0)}
    z = sum(raw.values())
    for y, p in out.items():
        assert math.isclose(p, raw[y] / z)


def test_limit_step_raises_without_children():
    g = make_full_binary_tree(1)
    with pytest.raises(ExtinctionError):
        limit_step({g.layer(1)[0]: 1.0}, g)


def test_schedule_validation():
    with pytest.raises(ProcessError):
        Schedule(mode="bogus", horizon=1.0)
    with pytest.raises(ProcessError):
        Schedule(mode="staged", horizon=2.0, stages=())


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6),
    st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6),
)
def test_tv_distance_is_a_bounded_metric(ps, qs):
    p = {i: v / sum(ps) for i, v in enumerate(ps)} if sum(ps) else {0: 1.0}
    q = {i: v / sum(qs) for i, v in enumerate(qs)} if sum(qs) else {1: 1.0}
    d = tv_distance(p, q)
    assert 0.0 <= d <= 1.0 + 1e-12
    assert math.isclose(d, tv_distance(q, p))
    assert tv_distance(p, p) == 0.0
