"""Whole-network max-flow by layer-wise sum-rate maximization.

Two drivers share one layer solver:

* ``flowmax_two_layer`` -- source, relay layer ``L1``, receiver layer ``L2``, destination.
  The source split is refined by redistributing power that saturated relays cannot use.
* ``flowmax_multilayer`` -- any depth.  Layers are solved front to back; when a layer is
  bottlenecked by its predecessors' power split, ``power_aug`` shifts power towards the
  unsaturated part and the sweep restarts.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .layer_solver import (DEFAULT_EPSILON, FEAS_TOL, LOG2, LayerProblem, RateFunction, layer_opt,
                           mac_layer_opt)
from .network import (DagNetwork, LayeredNetwork, NetworkError, dag_to_layered,
                      is_layer_connected, is_unbounded, power_value)

MAX_OUTER = 10_000
TWO_LAYER_MAX_OUTER = 1_000

Edge = tuple[str, str]


class NotLayerConnected(NetworkError):
    pass


@dataclass
class TraceEntry:
    iteration: int
    layer: int
    R: float
    U: tuple[str, ...]


@dataclass
class FlowSolution:
    flow: float
    rates: dict[Edge, float]
    powers: dict[Edge, float]
    layer_rates: dict[int, float]
    trace: list[TraceEntry]
    converged: bool
    method: str
    iterations: int = 0
    bottleneck: list[float] = field(default_factory=list)
    stop_reason: str = ""

    def out_rate(self, u: str) -> float:
        return sum(r for (a, _), r in self.rates.items() if a == u)

    def in_rate(self, v: str) -> float:
        return sum(r for (_, b), r in self.rates.items() if b == v)

    def check(self, net: LayeredNetwork, tol: float = 1e-6) -> list[str]:
        """Feasibility problems of this solution on ``net`` (empty when feasible)."""
        bad = []
        for v in net.nodes:
            if v in (net.source, net.destination):
                continue
            if self.in_rate(v) < self.out_rate(v) - tol:
                bad.append(f"conservation at {v}")
            P = power_value(net.power[v])
            if self.out_power(v) > P + tol:
                bad.append(f"budget at {v}")
        if self.out_power(net.source) > power_value(net.power[net.source]) + tol:
            bad.append("budget at source")
        for R in (self.out_rate(net.source), self.in_rate(net.destination)):
            if abs(R - self.flow) > tol:
                bad.append("flow value")
        return bad

    def out_power(self, u: str) -> float:
        return sum(p for (a, _), p in self.powers.items() if a == u)


def _problem(net, edges, f, g, mac=False) -> LayerProblem:
    return LayerProblem.from_maps(edges, f, dict(net.power), g, mac)


def _solve(problem, epsilon, rate):
    return mac_layer_opt(problem, epsilon, rate=rate) if problem.mac else layer_opt(problem, epsilon, rate=rate)


# ---------------------------------------------------------------- two layers

def flowmax_two_layer(net: LayeredNetwork, epsilon: float = DEFAULT_EPSILON, mac: bool = False,
                      max_iter: int = TWO_LAYER_MAX_OUTER, rate: RateFunction = LOG2) -> FlowSolution:
    """Max-flow of a source / two relay layers / destination network.

    Parameters
    ----------
    net : LayeredNetwork
        ``K == 2`` and every node of ``L2`` has a single edge, into the destination.
    epsilon : float
        Stop once the sum-rate changes by at most ``epsilon`` between iterations.
    mac : bool
        Treat each ``L2`` node as a Gaussian multiple-access receiver.

    Notes
    -----
    The source starts with an equal split ``P_s/|L1|``.  Each iteration caps relay ``i``
    by ``f_i = log2(1 + P_si)``, solves the relay-to-receiver layer, and collects the
    power ``Delta`` that capped relays (``r_i < f_i``) cannot use.  ``Delta/|L1|`` is then
    handed to every relay; capped relays are first reset to the power their rate needs.
    Stops when no relay or every relay is capped, or the sum-rate has stalled.
    """
    if net.K != 2:
        raise NetworkError(f"two-layer solver needs K=2, got K={net.K}")
    s, d = net.source, net.destination
    L1, L2 = net.layers[1], net.layers[2]
    for j in L2:
        if net.out_edges(j) != [(j, d)]:
            raise NetworkError(f"node {j} must have a single edge into the destination")
    if any(is_unbounded(net.power[v]) for v in (s, *L1)):
        raise NetworkError("two-layer solver needs finite source and relay budgets")
    n1 = len(L1)
    Ps = np.full(n1, power_value(net.power[s]) / n1)
    g = {j: float(rate.evaluate(power_value(net.power[j]))) for j in L2}
    mid = net.layer_edges(2)
    trace: list[TraceEntry] = []
    R_prev = None
    converged, reason = False, "iteration cap"
    for c in range(1, max_iter + 1):
        f = dict(zip(L1, rate.evaluate(Ps)))
        sol = _solve(_problem(net, mid, f, g, mac), epsilon, rate)
        ri = np.array([sol.left_rates[i] for i in L1])
        R = float(ri.sum())
        U = tuple(i for k, i in enumerate(L1) if ri[k] < f[i] - FEAS_TOL)
        trace.append(TraceEntry(c, 2, R, U))
        if len(U) == 0:
            converged, reason = True, "no capped relay"
            break
        if len(U) == n1:
            converged, reason = True, "all relays capped"
            break
        if c >= 2 and abs(R - R_prev) <= epsilon:
            converged, reason = True, "stalled"
            break
        inU = np.array([i in U for i in L1])
        need = rate.invert(ri)
        Delta = float(np.sum((Ps - need)[inU]))
        Ps = np.where(inU, need, Ps) + Delta / n1
        R_prev = R
    rates, powers = {}, {}
    for k, i in enumerate(L1):
        rates[(s, i)] = float(ri[k])
        powers[(s, i)] = float(Ps[k])
    rates.update(sol.rates)
    powers.update(sol.powers)
    for j in L2:
        rates[(j, d)] = sum(sol.rates[e] for e in mid if e[1] == j)
        powers[(j, d)] = power_value(net.power[j])
    return FlowSolution(R, rates, powers, {1: R, 2: R, 3: R}, trace, converged, "flowmax", len(trace),
                        stop_reason=reason)


# ---------------------------------------------------------------- any depth

def power_aug(net: LayeredNetwork, k: int, U, powers: dict[Edge, float], out_rates: dict[str, float],
              rate: RateFunction = LOG2, pick: str = "all") -> dict[Edge, float]:
    """Shift predecessors' power from the saturated set ``U`` of ``L_{k-1}`` towards the rest.

    ``powers`` holds the current per-edge allocation of the edges ``L_{k-2} -> L_{k-1}``;
    ``out_rates[v]`` is the rate ``v`` currently forwards.  While some predecessor ``u``
    feeds both ``U`` and its complement, take the smallest such ``u`` and shrink its
    edges into ``U`` (all of them in id order with ``pick="all"``; only the smallest with
    ``pick="id"``; only the one with most unused incoming capacity with ``pick="excess"``).
    For such an edge ``(u, v)``: if ``v``'s other feeders already cover ``r_v``, half of
    ``P_uv`` moves to ``u``'s edges into the complement; otherwise ``P_uv`` keeps the
    power ``v`` needs plus an equal share of the excess.  The touched complement nodes
    then join ``U``.  Every node's total power is preserved.

    Returns a new allocation; ``powers`` is not modified.
    """
    layer = net.layers[k - 1]
    if not 0 < len(set(U)) < len(layer):
        raise ValueError("U must be a proper nonempty subset of the layer")
    if k >= 2 and not is_layer_connected(net, k - 1):
        raise NotLayerConnected(f"layer {k - 1} is not layer connected")
    P = dict(powers)
    U = set(U)
    prev = sorted(net.layers[k - 2])
    outs = {u: sorted(b for _, b in net.out_edges(u)) for u in prev}
    feeders = {v: [a for a, _ in net.in_edges(v)] for v in layer}
    while True:
        cand = [u for u in prev if any(b in U for b in outs[u]) and any(b not in U for b in outs[u])]
        if not cand:
            break
        u = cand[0]
        inU = [b for b in outs[u] if b in U]
        if pick == "all":
            chosen = inU
        elif pick == "id":
            chosen = inU[:1]
        else:
            excess = [sum(float(rate.evaluate(P[(t, b)])) for t in feeders[b]) - out_rates[b] for b in inU]
            chosen = [inU[int(np.argmax(excess))]]
        W = [b for b in outs[u] if b not in U]
        du = len(W)
        if not is_unbounded(net.power[u]):
            for v in chosen:
                others = sum(float(rate.evaluate(P[(t, v)])) for t in feeders[v] if t != u)
                if others > out_rates[v]:
                    half = P[(u, v)] / 2
                    P[(u, v)] -= half
                    for w in W:
                        P[(u, w)] += half / du
                else:
                    Pt = float(rate.invert(out_rates[v] - others))
                    share = (P[(u, v)] - Pt) / (1 + du)
                    P[(u, v)] = Pt + share
                    for w in W:
                        P[(u, w)] += share
        U |= set(W)
    return P


def _fallback(net, epsilon, reason):
    from .oracle import direct_maxflow

    return _from_report(net, direct_maxflow(net, epsilon), reason=reason)


def _from_report(net, rep, mac=False, reason="") -> FlowSolution:
    """FlowSolution from a direct solve, trimmed to a consistent flow."""
    outs = {v: net.out_edges(v) for v in net.nodes}
    ins = {v: net.in_edges(v) for v in net.nodes}
    rates = _trim(net, rep.rates, outs, ins, forward_last=False)
    flow = sum(rates[e] for e in ins[net.destination])
    powers = dict(rep.powers) if mac else {e: float(LOG2.invert(v)) for e, v in rates.items()}
    pairs = {k: net.layer_edges(k) for k in range(1, net.K + 2)}
    layer_rates = {k: sum(rates[e] for e in pairs[k]) for k in pairs}
    return FlowSolution(flow, rates, powers, layer_rates, [], True, "direct", 0, stop_reason=reason)


def flowmax_multilayer(net: LayeredNetwork, epsilon: float = DEFAULT_EPSILON, max_iter: int = MAX_OUTER,
                       rate: RateFunction = LOG2, fallback: bool = True, pick: str = "all") -> FlowSolution:
    """Max-flow of a layered network by forward layer sweeps with power augmentation.

    Layer pair ``k`` joins ``L_{k-1}`` to ``L_k``.  Its left nodes are capped by their
    current inflow (the source by nothing) and its right nodes by what they can forward
    under the current split of their power.  Each node starts with an equal split over
    its out-edges; after a layer solve, power a node does not need is spread back over
    its edges unless the node is saturated by its inflow.

    When pair ``k`` leaves flow unused (slack above ``epsilon``) and its left layer is
    only partly saturated, ``power_aug`` rebalances pair ``k-1``, pairs ``k-2 .. 2`` are
    re-solved, and the sweep restarts at pair 2.  A full sweep that does not improve the
    flow into the last relay layer ends the run and the best sweep is returned.

    Networks with a layer that is not layer connected go to the direct convex solve
    (``method == "direct"``) unless ``fallback`` is false.
    """
    K = net.K
    if K == 0:
        # bare source -> destination link
        (e,) = net.edges
        R = float(rate.evaluate(power_value(net.power[e[0]])))
        if not math.isfinite(R):
            raise NetworkError("unbounded source on a direct link")
        return FlowSolution(R, {e: R}, {e: power_value(net.power[e[0]])}, {1: R}, [], True, "flowmax-ii")
    for k in range(1, K + 1):
        if not is_layer_connected(net, k):
            if not fallback:
                raise NotLayerConnected(f"layer {k} is not layer connected")
            return _fallback(net, epsilon, f"layer {k} not layer connected")
    s, d = net.source, net.destination
    budget = {v: power_value(net.power[v]) for v in net.nodes}
    outs = {v: net.out_edges(v) for v in net.nodes}
    ins = {v: net.in_edges(v) for v in net.nodes}
    pairs = {k: net.layer_edges(k) for k in range(1, K + 2)}
    P = {e: budget[e[0]] / len(outs[e[0]]) for e in net.edges}
    r = {e: 0.0 for e in net.edges}
    cap = lambda p: float(rate.evaluate(p))  # noqa: E731

    def f_of(i):
        return math.inf if i == s else sum(r[e] for e in ins[i])

    def g_of(j):
        return sum(cap(P[e]) for e in outs[j])

    state = {"converged": True}
    # shortfalls of successive layer solves add up along the path
    inner_eps = epsilon / (K + 1)

    def solve_pair(k):
        left = net.layers[k - 1]
        f = {i: f_of(i) for i in left}
        g = {j: g_of(j) for j in net.layers[k]}
        sol = layer_opt(_problem(net, pairs[k], f, g), inner_eps, rate=rate)
        state["converged"] &= sol.converged
        U = tuple(i for i in left if sol.left_rates[i] < f[i] - FEAS_TOL)
        for i in left:
            used = sum(float(rate.invert(sol.rates[e])) for e in outs[i])
            spare = max(0.0, budget[i] - used) / len(outs[i]) if i not in U else 0.0
            for e in outs[i]:
                r[e] = sol.rates[e]
                P[e] = math.inf if math.isinf(budget[i]) else float(rate.invert(sol.rates[e])) + spare
        R = sol.objective
        D = 0.0 if k == 1 else sum(f.values()) - R
        return R, U, D

    trace: list[TraceEntry] = []
    Rk: dict[int, float] = {}
    mins: list[float] = []
    best, snap = -math.inf, None
    k = 2 if K >= 2 else 1
    c = 0
    reason = "iteration cap"
    converged = False
    if k == 2:
        # the first sweep starts from the equal source split
        for e in pairs[1]:
            r[e] = cap(P[e])
    while c < max_iter:
        c += 1
        R, U, D = solve_pair(k)
        Rk[k] = R
        trace.append(TraceEntry(c, k, R, U))
        if len(Rk) == K:
            mins.append(min(Rk.values()))
        if k == K:
            if snap is not None and R <= best + epsilon:
                reason, converged = "no improvement over a full sweep", True
                break
            if R > best:
                best, snap = R, dict(r)
        left = net.layers[k - 1]
        if not U or len(U) == len(left) or k == 1 or D <= epsilon:
            k += 1
        else:
            out_rates = {v: sum(r[e] for e in outs[v]) for v in left}
            sub = {e: P[e] for e in pairs[k - 1]}
            P.update(power_aug(net, k, U, sub, out_rates, rate, pick))
            if k == 2:
                # the source has no inflow cap: its edges carry what the new split supports
                for e in pairs[1]:
                    r[e] = cap(P[e])
            for l in range(k - 2, 1, -1):
                solve_pair(l)
            k = 2
        if k > K:
            reason, converged = "all layers passed", True
            if R > best:
                best, snap = R, dict(r)
            break
    rates = _trim(net, snap if snap is not None else r, outs, ins)
    flow = sum(rates[e] for e in ins[d])
    layer_rates = {k: sum(rates[e] for e in pairs[k]) for k in pairs}
    powers = {e: float(rate.invert(v)) for e, v in rates.items()}
    return FlowSolution(flow, rates, powers, layer_rates, trace, converged and state["converged"],
                        "flowmax-ii", c, mins, reason)


def _trim(net, r, outs, ins, forward_last: bool = True) -> dict[Edge, float]:
    """Consistent flow from layer-wise rates: optionally forward what arrives at the last layer
    (its edges are never solved by the sweep), then cut every node's inflow back to its outflow
    so the source sends exactly the delivered flow."""
    rates = dict(r)
    if forward_last:
        for j in net.layers[-2]:
            (e,) = outs[j]
            rates[e] = sum(rates[x] for x in ins[j])
    for layer in reversed(net.layers[1:-1]):
        for v in layer:
            need = sum(rates[e] for e in outs[v])
            have = sum(rates[e] for e in ins[v])
            if have > need and have > 0:
                scale = need / have
                for e in ins[v]:
                    rates[e] *= scale
    return rates


# ---------------------------------------------------------------- entry points

def maxflow(net, epsilon: float = DEFAULT_EPSILON, mac: bool = False, method: str = "flowmax",
            max_iter: int | None = None) -> FlowSolution:
    """Max-flow of a DAG or layered network.

    ``method="flowmax"`` picks the two-layer driver when ``mac`` is set (the only driver
    with multiple-access receivers; other shapes go to the direct solve) and the
    multilayer driver otherwise.  ``method="direct"`` always uses the convex solve.
    """
    if isinstance(net, DagNetwork):
        net = dag_to_layered(net)
    if method == "direct" or (mac and not _two_layer_shape(net)):
        from .oracle import direct_maxflow

        return _from_report(net, direct_maxflow(net, epsilon, mac=mac), mac=mac)
    if method != "flowmax":
        raise ValueError(f"unknown method {method!r}")
    if mac:
        return flowmax_two_layer(net, epsilon, mac=True, **({"max_iter": max_iter} if max_iter else {}))
    return flowmax_multilayer(net, epsilon, **({"max_iter": max_iter} if max_iter else {}))


def _two_layer_shape(net: LayeredNetwork) -> bool:
    return (net.K == 2 and all(net.out_edges(j) == [(j, net.destination)] for j in net.layers[2])
            and not any(is_unbounded(net.power[v]) for v in (net.source, *net.layers[1])))


def min_cut_gap_demo(net: DagNetwork, epsilon: float = DEFAULT_EPSILON) -> tuple[float, float]:
    """Max-flow and the smallest cut capacity (each cut edge at its tail's full power).

    On networks where one node feeds several cut edges the two differ: its budget can
    only be spent once.
    """
    flow = maxflow(net, epsilon).flow
    s, d = net.source, net.destination
    mids = [v for v in net.nodes if v not in (s, d)]
    best = math.inf
    for bits in itertools.product((0, 1), repeat=len(mids)):
        S = {s} | {v for v, b in zip(mids, bits) if b}
        cap = sum(float(LOG2.evaluate(power_value(net.power[u]))) for u, v in net.edges if u in S and v not in S)
        best = min(best, cap)
    return flow, best
