import numpy as np
import pytest

from gffnet.maxflow import max_flow_min_cut
from gffnet.network import rectangle_network
from gffnet.resistance import solve_two_terminal
from oracles import brute_min_cut, lp_max_flow


def test_single_edge():
    r = max_flow_min_cut([[0, 1]], [3.0], [0], [1])
    assert r.value == 3.0
    assert r.cut.tolist() == [0] and r.cut_capacity == 3.0
    assert r.flow.tolist() == [3.0]


def test_diamond_matches_cut_enumeration():
    # s=0, a=1, b=2, t=3
    edges = [[0, 1], [0, 2], [1, 3], [2, 3], [1, 2]]
    cap = [2.0, 1.0, 1.0, 2.0, 1.0]
    r = max_flow_min_cut(edges, cap, [0], [3])
    ref = brute_min_cut(4, edges, cap, [0], [3])
    assert ref == 3.0
    assert abs(r.value - ref) < 1e-12
    assert abs(r.cut_capacity - r.value) < 1e-12


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        max_flow_min_cut([[0, 1]], [-1.0], [0], [1])
    with pytest.raises(ValueError):
        max_flow_min_cut([[0, 1]], [1.0], [0], [0])


def test_flow_is_conserved_and_capacity_feasible():
    rng = np.random.default_rng(3)
    net = rectangle_network(6, 5)
    cap = rng.uniform(0, 2, net.n_edges)
    A, Z = net.terminals
    r = max_flow_min_cut(net.edges, cap, A, Z, net.n_vertices)
    assert np.all(np.abs(r.flow) <= cap + 1e-12)
    div = np.zeros(net.n_vertices)
    np.add.at(div, net.edges[:, 0], r.flow)
    np.add.at(div, net.edges[:, 1], -r.flow)
    inner = np.setdiff1d(np.arange(net.n_vertices), np.concatenate([A, Z]))
    assert np.max(np.abs(div[inner])) < 1e-12
    assert abs(div[A].sum() - r.value) < 1e-12
    assert abs(r.cut_capacity - r.value) < 1e-9


@pytest.mark.parametrize("seed", range(8))
def test_small_instances_vs_enumeration(seed):
    # 3 x 2 cells: 12 vertices, 2 + 2 terminal vertices after the left and right columns
    rng = np.random.default_rng(seed)
    net = rectangle_network(3, 2)
    cap = rng.uniform(0, 1, net.n_edges)
    A, Z = net.terminals
    r = max_flow_min_cut(net.edges, cap, A, Z, net.n_vertices)
    assert abs(r.value - brute_min_cut(net.n_vertices, net.edges, cap, A, Z)) < 1e-10
    assert abs(r.value - lp_max_flow(net.n_vertices, net.edges, cap, A, Z)) < 1e-7


def test_capacities_from_prior_solve():
    net = rectangle_network(4, 4)
    sol = solve_two_terminal(net)
    cap = np.abs(sol.current)
    A, Z = net.terminals
    r = max_flow_min_cut(net.edges, cap, A, Z, net.n_vertices)
    # the unit current is itself a feasible flow saturating a cut
    assert abs(r.value - 1.0) < 1e-9
    assert abs(r.value - lp_max_flow(net.n_vertices, net.edges, cap, A, Z)) < 1e-7
