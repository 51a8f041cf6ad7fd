"""Batch experiments shared by ``scripts/`` and the acceptance suite."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .flowmax import FlowSolution, flowmax_multilayer, flowmax_two_layer
from .instances import (finite_edge_count, load_mac_sweep, load_relay_sweep, mac_relay_network, random_layered,
                        relay_network)
from .network import LayeredNetwork
from .online import ArrivalSequence, RateOracle, lazy_online, offline_lower_bound, random_arrivals
from .oracle import _grid_size, direct_maxflow, grid_maxflow

MONO_TOL = 1e-6


def decreases(seq, tol: float = MONO_TOL) -> int:
    """Number of steps where ``seq`` drops by more than ``tol``."""
    a = np.asarray(list(seq), dtype=float)
    return int(np.sum(np.diff(a) < -tol)) if len(a) > 1 else 0


def trace_violations(sol: FlowSolution, tol: float = MONO_TOL) -> int:
    """Drops in the sum-rate trace (two-layer driver) or in the bottleneck trace (multilayer driver)."""
    if sol.method == "flowmax":
        return decreases([t.R for t in sol.trace], tol)
    return decreases(sol.bottleneck, tol)


@dataclass
class SweepPoint:
    params: tuple[float, ...]
    expected: float
    got: float
    iterations: int
    violations: int

    @property
    def error(self) -> float:
        return abs(self.got - self.expected)


@dataclass
class SweepReport:
    points: list[SweepPoint]
    seconds: float

    def within(self, tol: float) -> list[SweepPoint]:
        return [p for p in self.points if p.error <= tol]

    def misses(self, tol: float) -> list[SweepPoint]:
        return [p for p in self.points if p.error > tol]


def relay_sweep(epsilon: float = 1e-6, rows=None) -> SweepReport:
    """Two-layer driver on every bundled orthogonal-link coordinate."""
    rows = rows if rows is not None else load_relay_sweep()
    t0 = time.perf_counter()
    pts = []
    for Ps, P5, ref in rows:
        sol = flowmax_two_layer(relay_network(Ps, P5), epsilon)
        pts.append(SweepPoint((Ps, P5), ref, sol.flow, sol.iterations, trace_violations(sol)))
    return SweepReport(pts, time.perf_counter() - t0)


def mac_sweep(epsilon: float = 1e-6, rows=None) -> SweepReport:
    """Two-layer driver with multiple-access receivers on every bundled interfering-link coordinate."""
    rows = rows if rows is not None else load_mac_sweep()
    t0 = time.perf_counter()
    pts = []
    for P2, P3, P5, ref in rows:
        sol = flowmax_two_layer(mac_relay_network(P2, P3, P5), epsilon, mac=True)
        pts.append(SweepPoint((P2, P3, P5), ref, sol.flow, sol.iterations, trace_violations(sol)))
    return SweepReport(pts, time.perf_counter() - t0)


@dataclass
class Agreement:
    net: LayeredNetwork
    flowmax: float
    reference: float
    method: str
    violations: int
    grid: float | None = None

    @property
    def rel_error(self) -> float:
        return abs(self.flowmax - self.reference) / max(self.reference, 1e-12)


def oracle_agreement(seed: int = 0, n: int = 50, max_K: int = 4, max_width: int = 4,
                     lo: float = 0.1, hi: float = 30.0, epsilon: float = 1e-6) -> list[Agreement]:
    """Multilayer driver against the direct convex solve on random layer-connected networks."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        K = int(rng.integers(1, max_K + 1))
        net = random_layered(rng, K, max_width, lo, hi)
        sol = flowmax_multilayer(net, epsilon)
        ref = direct_maxflow(net, epsilon).flow
        out.append(Agreement(net, sol.flow, ref, sol.method, trace_violations(sol)))
    return out


def random_tiny(rng: np.random.Generator, lo: float = 0.1, hi: float = 3.0, max_finite_edges: int = 6,
                resolution: float = 1e-3, max_points: int = 5_000_000) -> LayeredNetwork:
    """Random layer-connected network small enough for the grid search at ``resolution``."""
    while True:
        K = int(rng.integers(1, 3))
        net = random_layered(rng, K, 2, lo, hi, p_edge=0.5)
        if finite_edge_count(net) > max_finite_edges:
            continue
        size = 1
        for u in net.nodes:
            deg = len(net.out_edges(u))
            if deg > 1:
                size *= _grid_size(max(1, int(round(float(net.power[u]) / resolution))), deg)
        if size <= max_points:
            return net


def grid_agreement(seed: int = 0, n: int = 20, resolution: float = 1e-3, epsilon: float = 1e-6) -> list[Agreement]:
    """Multilayer driver and direct solve against the brute-force grid on tiny networks."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        net = random_tiny(rng, resolution=resolution)
        sol = flowmax_multilayer(net, epsilon)
        direct = direct_maxflow(net, epsilon).flow
        grid = grid_maxflow(net, resolution).flow
        out.append(Agreement(net, sol.flow, direct, sol.method, trace_violations(sol), grid))
    return out


# ---------------------------------------------------------------- online batch

@dataclass
class RatioRun:
    ratio: float
    bound: float
    T_lb: float
    completion: float
    adversarial: bool
    bits_ok: bool

    @property
    def ok(self) -> bool:
        return self.ratio <= self.bound + 1e-6


@dataclass
class RatioBatch:
    runs: list[RatioRun] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def violations(self) -> list[RatioRun]:
        return [r for r in self.runs if not r.ok]

    @property
    def max_ratio(self) -> float:
        return max(r.ratio for r in self.runs)

    @property
    def max_adversarial(self) -> float:
        return max((r.ratio for r in self.runs if r.adversarial), default=math.nan)


def single_burst(net: LayeredNetwork, rng: np.random.Generator, tau: float) -> ArrivalSequence:
    """Every transmitting node harvests once, all at the same early instant ``tau``."""
    nodes = [v for v in net.nodes if v != net.destination]
    return ArrivalSequence(tuple((tau, v, float(rng.uniform(1.0, 20.0))) for v in nodes), frozenset(net.nodes))


def ratio_batch(seed: int = 0, n_nets: int = 20, per_net: int = 10, K: int = 3, max_width: int = 3,
                delta: float = 1e-3, energy: str = "counter", epsilon: float = 1e-6) -> RatioBatch:
    """Lazy completion time against the offline lower bound.

    Per network: ``per_net - 1`` Poisson-like arrival streams with a target drawn as a
    uniform fraction (0.05 to 1) of what can be delivered by twice the last arrival,
    plus one single-burst stream whose target is exactly what the burst delivers by its
    own instant (the offline bound then sits at the burst, the lazy policy at twice it).
    """
    rng = np.random.default_rng(seed)
    batch = RatioBatch()
    t0 = time.perf_counter()
    for _ in range(n_nets):
        net = random_layered(rng, K, max_width, 0.0, 0.0)
        n_nodes = len(net.nodes)
        for j in range(per_net):
            oracle = RateOracle(net, epsilon)
            adversarial = j == per_net - 1
            if adversarial:
                tau = float(rng.uniform(0.5, 2.0))
                arr = single_burst(net, rng, tau)
                B = tau * oracle.rate(arr.energy_until(tau), tau)
            else:
                while True:
                    arr = random_arrivals(net, rng, n_events=int(rng.integers(n_nodes, 3 * n_nodes)))
                    T = 2 * arr.events[-1][0]
                    F = T * oracle.rate(arr.energy_until(T), T)
                    if F > 0:
                        break
                B = float(rng.uniform(0.05, 1.0)) * F
            lz = lazy_online(net, arr, B, delta, energy=energy, oracle=oracle)
            T_lb = offline_lower_bound(net, arr, B, delta, oracle=oracle)
            batch.runs.append(RatioRun(lz.completion / T_lb, 2 + 2 * delta / T_lb, T_lb, lz.completion,
                                       adversarial, lz.bits >= B * (1 - 1e-9)))
    batch.seconds = time.perf_counter() - t0
    return batch


def two_layer_vs_multilayer(rows=None, epsilon: float = 1e-6) -> list[tuple[tuple, float, float]]:
    """Both drivers on the relay coordinates: ``(params, two-layer, multilayer)``."""
    rows = rows if rows is not None else load_relay_sweep()
    return [((Ps, P5), flowmax_two_layer(relay_network(Ps, P5), epsilon).flow,
             flowmax_multilayer(relay_network(Ps, P5), epsilon).flow) for Ps, P5, _ in rows]
