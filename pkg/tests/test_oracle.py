import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehmaxflow.experiments import random_tiny
from ehmaxflow.instances import chain, cut_gap_network, random_layered, relay_network
from ehmaxflow.network import UNBOUNDED, LayeredNetwork, dag_to_layered, layered_from_lists
from ehmaxflow.oracle import NonConvergence, TooLarge, direct_maxflow, grid_maxflow

log2 = math.log2


def test_direct_on_relay_reference_point():
    rep = direct_maxflow(relay_network(20, 9.5))
    assert rep.flow == pytest.approx(6.78463, abs=5e-3)
    assert rep.method == "direct"
    assert -1e-9 <= rep.certified_gap <= 1e-6


def test_direct_on_unit_chain():
    assert direct_maxflow(chain([1, 1])).flow == pytest.approx(1.0, abs=1e-6)


def test_direct_needs_a_finite_budget():
    net = layered_from_lists([["s"], ["d"]], [("s", "d")], {"s": UNBOUNDED})
    with pytest.raises(NonConvergence):
        direct_maxflow(net)


def test_direct_mac_mode():
    assert direct_maxflow(relay_network(10, 9.5, 4, 5), mac=True).flow == pytest.approx(4.91886, abs=5e-3)


def test_grid_symmetric_split():
    net = layered_from_lists([["s"], ["a", "b"], ["d"]], [("s", "a"), ("s", "b"), ("a", "d"), ("b", "d")],
                             {"s": 2.0, "a": UNBOUNDED, "b": UNBOUNDED})
    rep = grid_maxflow(net, 0.01)
    assert rep.flow == pytest.approx(2.0, abs=0.02)
    assert rep.rates[("s", "a")] == pytest.approx(1.0, abs=0.02)


def test_grid_on_cut_gap_instance():
    rep = grid_maxflow(dag_to_layered(cut_gap_network(10, 0.1, 1000)), 1e-3)
    assert rep.flow == pytest.approx(log2(1 + 10 - 0.1) + log2(1.1), abs=5e-3)


def test_grid_zero_power():
    assert grid_maxflow(dag_to_layered(cut_gap_network(0, 0, 0)), 0.1).flow == 0.0


def test_grid_refuses_large_instances():
    with pytest.raises(TooLarge):
        grid_maxflow(random_layered(np.random.default_rng(0), 3, 3, 1, 2, p_edge=1.0))
    with pytest.raises(TooLarge):
        grid_maxflow(relay_network(20, 9.5), 1e-3, max_points=1000)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=10, deadline=None)
def test_direct_dominates_grid(seed):
    net = random_tiny(np.random.default_rng(seed), resolution=1e-2)
    res = 1e-2
    d = direct_maxflow(net).flow
    g = grid_maxflow(net, res).flow
    n_edges = len(net.edges)
    assert d >= g - 1e-6
    assert d <= g + n_edges * res / math.log(2) + 1e-6


def relabel(net: LayeredNetwork, rng) -> LayeredNetwork:
    names = {v: f"x{i}" for i, v in enumerate(rng.permutation(list(net.nodes)))}
    layers = [[names[v] for v in L] for L in net.layers]
    edges = [(names[u], names[v]) for u, v in net.edges]
    edges = [edges[i] for i in rng.permutation(len(edges))]
    return layered_from_lists(layers, edges, {names[v]: p for v, p in net.power.items()})


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_direct_is_label_invariant(seed):
    rng = np.random.default_rng(seed)
    net = random_layered(rng, int(rng.integers(1, 4)), 3, 0.1, 30)
    assert direct_maxflow(relabel(net, rng)).flow == pytest.approx(direct_maxflow(net).flow, abs=1e-6)
