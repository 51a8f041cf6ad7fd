"""One test per acceptance criterion; each prints a PASS/FAIL line with the measured numbers.

The lines are also collected into the ``acceptance criteria`` section of the terminal summary.
"""
import math

import pytest
from conftest import ACCEPTANCE_LINES

from ehmaxflow.experiments import (decreases, grid_agreement, mac_sweep, oracle_agreement, ratio_batch,
                                   relay_sweep, trace_violations)
from ehmaxflow.flowmax import flowmax_two_layer, min_cut_gap_demo
from ehmaxflow.instances import cut_gap_network, load_relay_sweep, relay_network, two_node
from ehmaxflow.layer_solver import cut_capacity
from ehmaxflow.network import dag_to_layered
from ehmaxflow.online import ArrivalSequence, competitive_ratio_estimate
from ehmaxflow.oracle import direct_maxflow

TOL = 5e-3
log2 = math.log2


def report(n, title, ok, detail):
    line = f"criterion {n} {title}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


@pytest.fixture(scope="module")
def relay():
    return relay_sweep()


@pytest.fixture(scope="module")
def mac():
    return mac_sweep()


@pytest.fixture(scope="module")
def agreement():
    return oracle_agreement(seed=0, n=50), grid_agreement(seed=0, n=20)


def test_criterion_1_relay_sweep(relay):
    hits = relay.within(TOL)
    named = {(20, 9.5): 6.78463, (15, 9.5): 6.17493, (20, 4.25): 6.52584}
    by = {p.params: p for p in relay.points}
    named_ok = all(abs(by[k].got - v) <= TOL for k, v in named.items())
    plateau10 = [p for p in relay.points if p.params[0] == 10 and p.params[1] >= 0.31]
    plateau_ok = all(abs(p.got - 5.16992) <= TOL for p in plateau10)
    misses = ", ".join(f"{p.params}:{p.got:.5f} vs {p.expected}" for p in relay.misses(TOL))
    ok = len(hits) >= 30 and named_ok and plateau_ok and relay.seconds < 10
    assert report(1, "relay sweep", ok,
                  f"{len(hits)}/{len(relay.points)} within {TOL}, {relay.seconds:.2f} s; misses: {misses}")


def test_criterion_2_source_cap_identity(relay):
    # no allocation gets more than 2 log2(1 + P_s/2) out of the source; it binds where the
    # independent convex solve reaches that bound (71 points sit within 2e-8, the rest >= 1.6e-3 short)
    checked, worst = 0, 0.0
    for Ps, P5, _ in load_relay_sweep():
        cap = 2 * log2(1 + Ps / 2)
        if cap - direct_maxflow(relay_network(Ps, P5)).flow > 1e-6:
            continue
        got = flowmax_two_layer(relay_network(Ps, P5)).flow
        worst = max(worst, abs(got - cap))
        checked += 1
    ok = checked > 0 and worst <= 1e-5
    assert report(2, "source-cap identity", ok, f"{checked} source-bound points, max |error| {worst:.2e}")


def test_criterion_3_mac_sweep(mac):
    hits = mac.within(TOL)
    by = {p.params: p for p in mac.points}
    named = {(9, 10, 9.5): 5.16993, (5, 6, 9.5): 4.91886, (3, 4, 0.142598): 2.74258}
    named_ok = all(abs(by[k].got - v) <= TOL for k, v in named.items())
    ok = len(hits) >= 15 and named_ok
    assert report(3, "multiple-access sweep", ok,
                  f"{len(hits)}/{len(mac.points)} within {TOL}, max error {max(p.error for p in mac.points):.2e}")


def test_criterion_4_oracle_agreement(agreement):
    direct, tiny = agreement
    worst = max(a.rel_error for a in direct)
    grid_worst = max(max(abs(a.flowmax - a.grid), abs(a.reference - a.grid)) for a in tiny)
    ok = len(direct) == 50 and worst <= 1e-3 and len(tiny) == 20 and grid_worst <= TOL
    assert report(4, "oracle agreement", ok,
                  f"50 random nets max relative error {worst:.1e}; 20 tiny nets max grid gap {grid_worst:.1e}")


def test_criterion_5_flow_below_cut():
    flow, _ = min_cut_gap_demo(cut_gap_network(10, 0.1, 1000))
    net = dag_to_layered(cut_gap_network(10, 0.1, 1000))
    cut = cut_capacity(net, [("a", "b"), ("c", "d")])
    target = log2(1.1) + log2(10.9)
    ok = abs(flow - target) <= 2e-3 and cut - flow > 0.05
    assert report(5, "max-flow below cut", ok, f"flow {flow:.5f} vs {target:.5f}, cut {cut:.4f}, gap {cut - flow:.4f}")


def test_criterion_6_monotone_traces(relay, mac, agreement):
    direct, tiny = agreement
    counts = {
        "relay sum-rate": sum(p.violations for p in relay.points),
        "mac sum-rate": sum(p.violations for p in mac.points),
        "random bottleneck": sum(a.violations for a in direct),
        "tiny bottleneck": sum(a.violations for a in tiny),
    }
    runs = len(relay.points) + len(mac.points) + len(direct) + len(tiny)
    ok = sum(counts.values()) == 0
    assert report(6, "monotone traces", ok, f"{runs} runs, violations {counts}")


def _ratio_line(batch, label):
    worst = max(batch.runs, key=lambda r: r.ratio - r.bound)
    return (f"{label}: {len(batch.violations)}/{len(batch.runs)} runs above bound, max ratio {batch.max_ratio:.4f}, "
            f"worst excess {worst.ratio - worst.bound:.3g}, adversarial max {batch.max_adversarial:.4f}, "
            f"{batch.seconds:.1f} s")


def test_criterion_7_ratio_bound():
    # energy known when the trigger fires (the default rule); late arrivals can push the ratio past 2
    batch = ratio_batch(seed=0, energy="counter")
    ok = (len(batch.runs) == 200 and not batch.violations and batch.max_adversarial > 1.9
          and all(r.bits_ok for r in batch.runs) and batch.seconds < 60)
    assert report(7, "competitive ratio", ok, _ratio_line(batch, "counter energy"))


def test_criterion_7_ratio_bound_with_current_energy():
    batch = ratio_batch(seed=0, energy="current")
    ok = (len(batch.runs) == 200 and not batch.violations and batch.max_adversarial > 1.9
          and all(r.bits_ok for r in batch.runs) and batch.seconds < 60)
    assert report("7b", "competitive ratio, energy harvested by the start time", ok,
                  _ratio_line(batch, "current energy"))


def test_criterion_8_two_node_closed_form():
    net = two_node()
    arr = ArrivalSequence.for_network(net, [(1.0, "s", 3.0)])
    delta = 1e-4
    res = competitive_ratio_estimate(net, arr, 2.0, delta)
    lz = res.lazy
    ok = (abs(lz.t_min - 1) <= delta and abs(lz.completion - 2) <= 2 * delta and abs(res.lower_bound - 1) <= delta)
    assert report(8, "two-node closed form", ok,
                  f"t_min {lz.t_min:.6f}, completion {lz.completion:.6f}, T_lb {res.lower_bound:.6f}")


def test_criterion_9_iteration_count(relay):
    pts = [p for p in relay.points if p.params[0] in (15, 20)]
    slow = [(p.params, p.iterations) for p in pts if p.iterations > 10]
    ok = bool(pts) and not slow
    assert report(9, "iteration count", ok,
                  f"{len(pts)} points, max {max(p.iterations for p in pts)} iterations, over 10: {slow}")


def test_monotone_helper():
    assert decreases([1, 2, 2, 3]) == 0 and decreases([1, 0.5, 2]) == 1
    sol = flowmax_two_layer(relay_network(20, 9.5))
    assert trace_violations(sol) == 0
