import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aamrp.oracles import reachability_within
from aamrp.topology import (
    MobilityField, MobilityState, Position, WorldConfig, adjacency_lists, adjacency_matrix,
    advance_mobility, connectivity, initial_state, k_hop_set, neighbors,
)

CFG = WorldConfig()


def rng(seed=0):
    return np.random.default_rng(seed)


# --- random waypoint -------------------------------------------------------

def test_pause_counts_down_in_place():
    s = MobilityState(Position(10, 10), Position(10, 10), 5.0, pause_remaining=5.0)
    out = advance_mobility(s, CFG, 2.0, rng())
    assert out.pause_remaining == pytest.approx(3.0)
    assert out.current == Position(10, 10)


def test_linear_motion_toward_waypoint():
    s = MobilityState(Position(0, 0), Position(100, 0), 10.0)
    out = advance_mobility(s, CFG, 1.0, rng())
    assert out.current.x == pytest.approx(10.0)
    assert out.current.y == pytest.approx(0.0)


def test_overshoot_clamps_to_waypoint_and_pauses():
    s = MobilityState(Position(0, 0), Position(3, 4), 10.0)
    out = advance_mobility(s, CFG, 1.0, rng())
    assert out.current == Position(3, 4)
    assert out.pause_remaining == CFG.pause_time


def test_end_of_pause_draws_new_leg():
    s = MobilityState(Position(5, 5), Position(5, 5), 3.0, pause_remaining=0.5)
    out = advance_mobility(s, CFG, 1.0, rng(3))
    assert out.pause_remaining == 0
    assert out.current == Position(5, 5)
    assert CFG.min_speed <= out.speed <= CFG.max_speed


def test_non_positive_dt_rejected():
    s = initial_state(CFG, rng())
    with pytest.raises(ValueError):
        advance_mobility(s, CFG, 0.0, rng())


@given(seed=st.integers(0, 10_000), steps=st.integers(1, 200), dt=st.floats(0.05, 3.0))
def test_scalar_walk_stays_inside_area(seed, steps, dt):
    r = rng(seed)
    s = initial_state(CFG, r)
    for _ in range(steps):
        s = advance_mobility(s, CFG, dt, r)
        assert 0 <= s.current.x <= CFG.area_width
        assert 0 <= s.current.y <= CFG.area_height
        assert s.pause_remaining >= 0
        assert CFG.min_speed <= s.speed <= CFG.max_speed


@given(seed=st.integers(0, 10_000))
def test_field_stays_inside_area(seed):
    f = MobilityField(WorldConfig(n_nodes=30), rng(seed))
    for _ in range(300):
        f.step(0.1)
        assert (f.pos >= 0).all()
        assert (f.pos[:, 0] <= 600).all() and (f.pos[:, 1] <= 600).all()


def test_field_trajectory_is_reproducible():
    a = MobilityField(WorldConfig(n_nodes=20), rng(11))
    b = MobilityField(WorldConfig(n_nodes=20), rng(11))
    for _ in range(500):
        a.step(0.1)
        b.step(0.1)
    assert np.array_equal(a.pos, b.pos)


def test_field_respects_speed_bound_per_tick():
    f = MobilityField(WorldConfig(n_nodes=40), rng(2))
    for _ in range(200):
        before = f.pos.copy()
        f.step(0.1)
        moved = np.hypot(*(f.pos - before).T)
        assert (moved <= CFG.max_speed * 0.1 + 1e-9).all()


def test_static_field_never_moves():
    f = MobilityField(WorldConfig(n_nodes=10, min_speed=0, max_speed=0), rng(0))
    start = f.pos.copy()
    for _ in range(50):
        f.step(0.1)
    assert np.array_equal(start, f.pos)


# --- neighbours and k-hop sets --------------------------------------------

def test_range_boundary_is_inclusive():
    pos = [Position(0, 0), Position(250, 0)]
    assert neighbors(0, pos, 250) == {1}
    assert neighbors(1, pos, 250) == {0}


def test_just_out_of_range():
    pos = [Position(0, 0), Position(250.01, 0)]
    assert neighbors(0, pos, 250) == set()
    assert neighbors(1, pos, 250) == set()


def test_collinear_three_nodes():
    pos = [Position(0, 0), Position(200, 0), Position(400, 0)]
    assert neighbors(1, pos, 250) == {0, 2}
    assert neighbors(0, pos, 250) == {1}
    assert neighbors(2, pos, 250) == {1}


def test_matrix_agrees_with_scalar_neighbours():
    r = rng(4)
    pts = r.uniform(0, 600, size=(25, 2))
    pos = [Position(*p) for p in pts]
    adj = adjacency_lists(pts, 250)
    for i in range(25):
        assert set(adj[i]) == neighbors(i, pos, 250)


def test_path_graph_k_hop():
    adj = {"a": ["b"], "b": ["a", "c"], "c": ["b"]}
    assert k_hop_set("a", adj, 1) == {"b"}
    assert k_hop_set("a", adj, 2) == {"b", "c"}
    assert connectivity("a", adj, 2) == 2


def test_connectivity_isolated_and_star():
    assert connectivity(0, {0: []}, 2) == 0
    star = {0: [1, 2, 3, 4], 1: [0], 2: [0], 3: [0], 4: [0]}
    assert connectivity(0, star, 1) == 4
    for leaf in (1, 2, 3, 4):
        assert connectivity(leaf, star, 1) == 1


def test_k_must_be_positive():
    with pytest.raises(ValueError):
        k_hop_set(0, {0: []}, 0)


@st.composite
def graphs(draw, max_n=10):
    n = draw(st.integers(1, max_n))
    edges = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n))
    m = np.zeros((n, n), dtype=bool)
    for u, v in edges:
        if u != v:
            m[u, v] = m[v, u] = True
    return m


@given(graphs(), st.integers(1, 5))
def test_k_hop_matches_matrix_power_reachability(m, k):
    adj = [np.flatnonzero(r).tolist() for r in m]
    reach = reachability_within(m, k)
    for i in range(len(adj)):
        assert k_hop_set(i, adj, k) == set(np.flatnonzero(reach[i]).tolist())


@given(graphs(), st.integers(1, 4))
def test_k_hop_monotone_in_k(m, k):
    adj = [np.flatnonzero(r).tolist() for r in m]
    for i in range(len(adj)):
        assert k_hop_set(i, adj, k) <= k_hop_set(i, adj, k + 1)


@given(st.lists(st.tuples(st.floats(0, 600), st.floats(0, 600)), min_size=1, max_size=30))
def test_adjacency_symmetric(points):
    m = adjacency_matrix(np.array(points, dtype=float), 250.0)
    assert (m == m.T).all()
    assert not m.diagonal().any()


def test_distance_helper():
    assert Position(0, 0).distance(Position(3, 4)) == pytest.approx(5.0)
    assert math.isclose(Position(1, 1).distance(Position(1, 1)), 0.0)


def test_world_defaults_and_violations():
    w = WorldConfig()
    assert (w.area_width, w.area_height, w.radio_range, w.max_speed, w.pause_time, w.sim_time) == \
        (600, 600, 250, 10, 5, 50)
    assert w.violations() == []
    bad = WorldConfig(radio_range=0, k_hops=0, sim_time=0).violations()
    keys = {k for k, _ in bad}
    assert {"world.radio_range", "protocol.k_hops", "world.sim_time"} <= keys
