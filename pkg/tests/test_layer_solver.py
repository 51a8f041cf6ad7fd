import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from oracles import grid_layer

from ehmaxflow.instances import cut_gap_network, relay_network
from ehmaxflow.layer_solver import LOG2, FEAS_TOL, LayerProblem, NotACut, RateFunction, cut_capacity, layer_opt, mac_layer_opt
from ehmaxflow.network import UNBOUNDED, dag_to_layered

INF = math.inf


def problem(edges, f, P, g, mac=False):
    return LayerProblem.from_maps(edges, f, P, g, mac)


# ---------------------------------------------------------------- rate function

@given(st.floats(0, 1e6))
def test_rate_inverse_round_trip(p):
    assert LOG2.invert(LOG2.evaluate(p)) == pytest.approx(p, rel=1e-12, abs=1e-12)


def test_rate_function_shape():
    p = np.linspace(0, 50, 501)
    r = LOG2.evaluate(p)
    assert r[0] == 0
    assert np.all(np.diff(r) > 0) and np.all(np.diff(r, 2) < 0)
    assert RateFunction(math.e).evaluate(math.e - 1) == pytest.approx(1.0)


# ---------------------------------------------------------------- closed forms

def test_single_link():
    sol = layer_opt(problem([("a", "b")], {"a": 10}, {"a": 3}, {"b": 10}))
    assert sol.objective == pytest.approx(2.0, abs=1e-6)
    assert sol.powers[("a", "b")] == pytest.approx(3.0, abs=1e-5)


def test_symmetric_split():
    sol = layer_opt(problem([("a", "b"), ("a", "c")], {"a": 10}, {"a": 2}, {"b": 10, "c": 10}))
    assert sol.objective == pytest.approx(2.0, abs=1e-6)
    assert sol.powers[("a", "b")] == pytest.approx(1.0, abs=1e-4)
    assert sol.powers[("a", "c")] == pytest.approx(1.0, abs=1e-4)


def test_relay_layer_matches_power_grid():
    E = [("2", "4"), ("2", "5"), ("3", "4"), ("3", "5")]
    pr = problem(E, {"2": math.log2(11), "3": math.log2(11)}, {"2": 5, "3": 6},
                 {"4": math.log2(31), "5": math.log2(10.5)})
    sol = layer_opt(pr)
    ref = grid_layer(pr, 1e-3)
    # the grid is a lower bound; four edges at 1e-3 W cost at most about 6e-3 b/s/Hz
    assert ref - 1e-6 <= sol.objective <= ref + 2e-3


def test_caps_bind():
    sol = layer_opt(problem([("a", "b")], {"a": 0.5}, {"a": 100}, {"b": 10}))
    assert sol.objective == pytest.approx(0.5, abs=1e-6)
    sol = layer_opt(problem([("a", "b")], {"a": 10}, {"a": 100}, {"b": 0.25}))
    assert sol.objective == pytest.approx(0.25, abs=1e-6)


def test_unbounded_node_limited_only_by_caps():
    sol = layer_opt(problem([("x", "b"), ("x", "c")], {"x": 3.0}, {"x": UNBOUNDED}, {"b": 1.0, "c": 5.0}))
    assert sol.objective == pytest.approx(3.0, abs=1e-6)
    assert sol.rates[("x", "b")] <= 1.0 + 1e-7


def test_zero_power_gives_zero():
    sol = layer_opt(problem([("a", "b")], {"a": 10}, {"a": 0.0}, {"b": 10}))
    assert sol.objective == pytest.approx(0.0, abs=1e-9)


def test_invalid_problems_rejected():
    with pytest.raises(ValueError):
        problem([("a", "b")], {"a": -1}, {"a": 1}, {"b": 1})
    with pytest.raises(ValueError):
        LayerProblem(("a", "z"), ("b",), (("a", "b"),), (1, 1), (1, 1), (1,))


# ---------------------------------------------------------------- MAC receivers

def test_mac_with_single_senders_matches_plain():
    E = [("2", "4"), ("3", "5")]
    args = (E, {"2": 3.0, "3": 3.0}, {"2": 5, "3": 6}, {"4": 2.5, "5": 10})
    a = layer_opt(problem(*args))
    b = mac_layer_opt(problem(*args, mac=True))
    assert a.objective == pytest.approx(b.objective, abs=1e-6)


def test_mac_sum_constraint_binds():
    sol = mac_layer_opt(problem([("a", "r"), ("b", "r")], {"a": INF, "b": INF}, {"a": 1, "b": 1}, {"r": INF}, True))
    assert sol.objective == pytest.approx(math.log2(3), abs=1e-5)
    plain = layer_opt(problem([("a", "r"), ("b", "r")], {"a": INF, "b": INF}, {"a": 1, "b": 1}, {"r": INF}))
    assert plain.objective == pytest.approx(2.0, abs=1e-6)


def test_mac_solution_respects_every_subset():
    E = [("a", "r"), ("b", "r"), ("c", "r"), ("a", "q"), ("c", "q")]
    sol = mac_layer_opt(problem(E, {"a": 4, "b": 1, "c": 4}, {"a": 3, "b": 2, "c": 5}, {"r": 3.0, "q": 10}, True))
    for recv in ("r", "q"):
        inc = [e for e in E if e[1] == recv]
        for size in range(1, len(inc) + 1):
            for S in itertools.combinations(inc, size):
                lhs = sum(sol.rates[e] for e in S)
                assert lhs <= math.log2(1 + sum(sol.powers[e] for e in S)) + 1e-6
    assert sol.slack >= -FEAS_TOL


# ---------------------------------------------------------------- cut capacity

def test_cut_capacity_closed_forms():
    net = relay_network(15, 9.5)
    assert cut_capacity(net, [("s", "2"), ("s", "3")]) == pytest.approx(2 * math.log2(16))
    assert cut_capacity(net, [("4", "d"), ("5", "d")]) == pytest.approx(math.log2(31) + math.log2(10.5))
    fig = dag_to_layered(cut_gap_network(10, 0.1, 1000))
    assert cut_capacity(fig, [("a", "b"), ("c", "d")]) == pytest.approx(math.log2(11) + math.log2(1001))
    with pytest.raises(NotACut):
        cut_capacity(net, [("s", "2")])


# ---------------------------------------------------------------- properties

@st.composite
def layer_problems(draw, max_left=3, max_right=3, hi=20.0):
    nl = draw(st.integers(1, max_left))
    nr = draw(st.integers(1, max_right))
    L = [f"l{i}" for i in range(nl)]
    R = [f"r{j}" for j in range(nr)]
    pairs = [(u, v) for u in L for v in R]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    E = {p for p, m in zip(pairs, mask) if m}
    for i, u in enumerate(L):
        E.add((u, R[i % nr]))
    for j, v in enumerate(R):
        E.add((L[j % nl], v))
    E = sorted(E)
    cap = st.one_of(st.floats(0.0, 8.0), st.just(INF))
    f = {u: draw(cap) for u in L}
    g = {v: draw(cap) for v in R}
    P = {u: draw(st.floats(0.0, hi)) for u in L}
    return problem(E, f, P, g)


def feasible(pr, r, tol=1e-9):
    if np.any(r < -tol):
        return False
    for i, u in enumerate(pr.left):
        ks = [k for k, e in enumerate(pr.edges) if e[0] == u]
        if sum(r[k] for k in ks) > pr.f[i] + tol:
            return False
        if sum(2.0 ** r[k] - 1 for k in ks) > float(pr.power[i]) + tol:
            return False
    for j, v in enumerate(pr.right):
        if sum(r[k] for k, e in enumerate(pr.edges) if e[1] == v) > pr.g[j] + tol:
            return False
    return True


@given(layer_problems(), st.sampled_from(["f", "g", "P"]), st.floats(0.01, 5.0), st.integers(0, 2))
@settings(max_examples=40, deadline=None)
def test_enlarging_a_constraint_never_lowers_the_optimum(pr, which, amount, idx):
    base = layer_opt(pr).objective
    if which == "f":
        i = idx % len(pr.left)
        f = list(pr.f)
        f[i] += amount
        bigger = LayerProblem(pr.left, pr.right, pr.edges, f, pr.power, pr.g)
    elif which == "g":
        j = idx % len(pr.right)
        g = list(pr.g)
        g[j] += amount
        bigger = LayerProblem(pr.left, pr.right, pr.edges, pr.f, pr.power, g)
    else:
        i = idx % len(pr.left)
        P = list(pr.power)
        P[i] += amount
        bigger = LayerProblem(pr.left, pr.right, pr.edges, pr.f, P, pr.g)
    assert layer_opt(bigger).objective >= base - 1e-6


@given(layer_problems(), st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_no_feasible_ascent_direction(pr, seed):
    sol = layer_opt(pr)
    r = np.array([sol.rates[e] for e in pr.edges])
    assert feasible(pr, r, 1e-7)
    h = 1e-3
    dirs = list(np.eye(len(r))) + list(np.random.default_rng(seed).random((10, len(r))))
    for d in dirs:
        d = d / d.sum()
        assert not feasible(pr, r + h * d, 0.0)


@given(layer_problems())
@settings(max_examples=40, deadline=None)
def test_powers_follow_rates_and_respect_budgets(pr):
    sol = layer_opt(pr)
    for e, r in sol.rates.items():
        assert sol.powers[e] == LOG2.invert(r)
    for i, u in enumerate(pr.left):
        used = sum(p for e, p in sol.powers.items() if e[0] == u)
        assert used <= float(pr.power[i]) + FEAS_TOL
        assert sol.left_rates[u] <= pr.f[i] + FEAS_TOL
    assert sol.slack >= -FEAS_TOL and sol.converged


@given(layer_problems(max_left=3, max_right=3, hi=2.0))
@settings(max_examples=12, deadline=None)
def test_agrees_with_power_grid(pr):
    sizes = 1
    for u, p in zip(pr.left, pr.power):
        d = sum(1 for e in pr.edges if e[0] == u)
        sizes *= math.comb(int(round(float(p) / 1e-3)) + d - 1, d - 1) if d > 1 else 1
    assume(sizes <= 3_000_000)
    sol = layer_opt(pr)
    assert abs(sol.objective - grid_layer(pr, 1e-3)) <= 2e-3
