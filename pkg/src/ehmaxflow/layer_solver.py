"""Single layer-pair sum-rate maximization, with optional Gaussian-MAC receivers."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _barrier
from .network import LayeredNetwork, NetworkError, Power, is_unbounded, power_value

DEFAULT_EPSILON = 1e-6
MAX_ITER = 100_000
FEAS_TOL = 1e-7
# edges whose cap is below this carry nothing; the barrier cannot start inside a subnormal interval
TINY_CAP = 1e-12


@dataclass(frozen=True)
class RateFunction:
    """``r(P) = log_base(1 + P)`` and its inverse."""

    base: float = 2.0

    def evaluate(self, p):
        return np.log1p(p) / np.log(self.base)

    def invert(self, r):
        return np.expm1(np.asarray(r, dtype=float) * np.log(self.base))


LOG2 = RateFunction(2.0)


class UnboundedProblem(ValueError):
    pass


@dataclass(frozen=True)
class LayerProblem:
    """Bipartite sum-rate problem between left nodes (caps ``f``, budgets ``power``) and right nodes (caps ``g``).

    ``power`` entries may be UNBOUNDED; ``f``/``g`` may be ``inf``.
    """

    left: tuple[str, ...]
    right: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    f: tuple[float, ...]
    power: tuple[Power, ...]
    g: tuple[float, ...]
    mac: bool = False

    def __post_init__(self):
        for name in ("left", "right", "edges", "f", "power", "g"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if len(self.f) != len(self.left) or len(self.power) != len(self.left) or len(self.g) != len(self.right):
            raise ValueError("cap vectors do not match node lists")
        if any(not (x >= 0) for x in self.f) or any(not (x >= 0) for x in self.g):
            raise ValueError("caps must be nonnegative")
        if any(not is_unbounded(p) and not (p >= 0) for p in self.power):
            raise ValueError("powers must be nonnegative or UNBOUNDED")
        L, R = set(self.left), set(self.right)
        if any(u not in L or v not in R for u, v in self.edges):
            raise ValueError("edge endpoints must be left -> right")
        if {u for u, _ in self.edges} != L or {v for _, v in self.edges} != R:
            raise ValueError("every left node needs an outgoing and every right node an incoming edge")

    @classmethod
    def from_maps(cls, edges: Sequence[tuple[str, str]], f: Mapping[str, float], power: Mapping[str, Power],
                  g: Mapping[str, float], mac: bool = False) -> "LayerProblem":
        left = tuple(dict.fromkeys(u for u, _ in edges))
        right = tuple(dict.fromkeys(v for _, v in edges))
        return cls(left, right, tuple(edges), tuple(f[u] for u in left), tuple(power[u] for u in left),
                   tuple(g[v] for v in right), mac)


@dataclass
class LayerSolution:
    rates: dict[tuple[str, str], float]
    powers: dict[tuple[str, str], float]
    left_rates: dict[str, float]
    objective: float
    iterations: int
    slack: float
    gap: float
    converged: bool = True
    duals: dict[str, float] = field(default_factory=dict)


def _index(problem: LayerProblem):
    li = {u: i for i, u in enumerate(problem.left)}
    ri = {v: j for j, v in enumerate(problem.right)}
    tail = np.array([li[u] for u, _ in problem.edges], dtype=int)
    head = np.array([ri[v] for _, v in problem.edges], dtype=int)
    return tail, head


def _edge_caps(problem: LayerProblem, tail, head, rate: RateFunction):
    """Loose per-edge upper bound on r_e; ``inf`` when no constraint limits the edge."""
    f = np.array(problem.f, dtype=float)
    g = np.array(problem.g, dtype=float)
    P = np.array([power_value(p) for p in problem.power])
    return np.minimum(np.minimum(f[tail], g[head]), rate.evaluate(P[tail]))


def _report(problem, r, p, iterations, gap, converged, rate, duals=None) -> LayerSolution:
    tail, head = _index(problem)
    m = len(problem.edges)
    f = np.array(problem.f, dtype=float)
    g = np.array(problem.g, dtype=float)
    P = np.array([power_value(q) for q in problem.power])
    nl, nr = len(problem.left), len(problem.right)
    ri = np.bincount(tail, weights=r, minlength=nl)
    rj = np.bincount(head, weights=r, minlength=nr)
    used = np.bincount(tail, weights=p, minlength=nl)
    slack = [np.min(r, initial=np.inf), np.min((f - ri)[np.isfinite(f)], initial=np.inf),
             np.min((g - rj)[np.isfinite(g)], initial=np.inf), np.min((P - used)[np.isfinite(P)], initial=np.inf)]
    if problem.mac:
        slack.append(_mac_worst(problem, r, p, head, rate))
    return LayerSolution(
        rates={e: float(r[k]) for k, e in enumerate(problem.edges)},
        powers={e: float(p[k]) for k, e in enumerate(problem.edges)},
        left_rates={u: float(ri[i]) for i, u in enumerate(problem.left)},
        objective=float(r.sum()),
        iterations=iterations,
        slack=float(min(slack)),
        gap=float(gap),
        converged=converged,
        duals=duals or {},
    ) if m else LayerSolution({}, {}, {u: 0.0 for u in problem.left}, 0.0, 0, 0.0, 0.0)


def layer_opt(problem: LayerProblem, epsilon: float = DEFAULT_EPSILON, max_iter: int = MAX_ITER,
              rate: RateFunction = LOG2) -> LayerSolution:
    """Maximize the total rate across one layer pair.

    Solves, over edge rates ``r_ij >= 0``,

        max sum r_ij  s.t.  sum_j (2**r_ij - 1) <= P_i,  sum_j r_ij <= f_i,  sum_i r_ij <= g_j

    with a primal log-barrier method in rate space.  The returned objective is within
    ``epsilon`` of the optimum (barrier duality-gap certificate) and strictly feasible.

    Parameters
    ----------
    problem : LayerProblem
        Must have ``mac=False``; use :func:`mac_layer_opt` for MAC receivers.
    epsilon : float
        Certified optimality gap, in rate units.

    Returns
    -------
    LayerSolution
        Edge rates, powers ``P_ij = 2**r_ij - 1``, per-left totals and diagnostics.
    """
    if problem.mac:
        return mac_layer_opt(problem, epsilon, max_iter, rate)
    if rate.base != 2.0:
        raise NotImplementedError("barrier blocks are specialised to base-2 rates")
    tail, head = _index(problem)
    m = len(problem.edges)
    caps = _edge_caps(problem, tail, head, rate)
    free = np.flatnonzero(caps > TINY_CAP)
    r = np.zeros(m)
    if len(free) == 0:
        return _report(problem, r, rate.invert(r), 0, 0.0, True, rate)
    if not np.all(np.isfinite(caps[free])):
        raise UnboundedProblem("an edge is limited by neither power nor rate caps")

    n = len(free)
    ft, fh = tail[free], head[free]
    rows, rhs = [-np.eye(n)], [np.zeros(n)]
    for cap, idx, size in ((problem.f, ft, len(problem.left)), (problem.g, fh, len(problem.right))):
        cap = np.asarray(cap, dtype=float)
        for a in range(size):
            if math.isfinite(cap[a]) and np.any(idx == a):
                rows.append((idx == a).astype(float)[None, :])
                rhs.append(cap[a:a + 1])
    blocks = [_barrier.Linear(np.vstack(rows), np.concatenate(rhs))]
    P = np.array([power_value(p) for p in problem.power])
    fin = [i for i in range(len(problem.left)) if math.isfinite(P[i]) and np.any(ft == i)]
    if fin:
        M = np.array([(ft == i).astype(float) for i in fin])
        blocks.append(_barrier.ExpSum(M, P[fin]))

    # strictly interior start: half of each edge's equal share of every cap it touches
    deg_l = np.bincount(ft, minlength=len(problem.left))
    deg_r = np.bincount(fh, minlength=len(problem.right))
    f = np.array(problem.f, dtype=float)
    g = np.array(problem.g, dtype=float)
    share = np.minimum(np.minimum(f[ft] / deg_l[ft], g[fh] / deg_r[fh]), rate.evaluate(P[ft] / deg_l[ft]))
    x0 = 0.5 * share
    res = _barrier.maximize(np.ones(n), blocks, x0, eps=epsilon, max_iter=max_iter)
    r[free] = np.maximum(res.x, 0.0)
    return _report(problem, r, rate.invert(r), res.iterations, res.gap, res.converged, rate)


def _mac_worst(problem, r, p, head, rate) -> float:
    worst = np.inf
    P = [power_value(q) for q in problem.power]
    tail, _ = _index(problem)
    for j in range(len(problem.right)):
        idx = [k for k in np.flatnonzero(head == j) if math.isfinite(P[tail[k]])]
        for size in range(1, len(idx) + 1):
            for S in itertools.combinations(idx, size):
                S = list(S)
                worst = min(worst, rate.evaluate(p[S].sum()) - r[S].sum())
    return worst


def _most_violated(idx, r, p, tol):
    best, best_S = tol, None
    for size in range(2, len(idx) + 1):
        for S in itertools.combinations(idx, size):
            S = list(S)
            v = r[S].sum() - np.log2(1 + p[S].sum())
            if v > best:
                best, best_S = v, S
    return best_S


def mac_layer_opt(problem: LayerProblem, epsilon: float = DEFAULT_EPSILON, max_iter: int = MAX_ITER,
                  rate: RateFunction = LOG2, max_cuts: int = 200) -> LayerSolution:
    """Layer sum-rate with Gaussian-MAC regions at the receivers.

    Powers ``P_ij`` become variables next to the rates; each receiver ``j`` enforces
    ``sum_{i in S} r_ij <= log2(1 + sum_{i in S} P_ij)`` for every subset ``S`` of its
    finite-power senders.  Singletons and full sets are imposed up front, the remaining
    subsets are added lazily (most violated first) until none is violated.
    """
    if rate.base != 2.0:
        raise NotImplementedError("barrier blocks are specialised to base-2 rates")
    tail, head = _index(problem)
    m = len(problem.edges)
    caps = _edge_caps(problem, tail, head, rate)
    r = np.zeros(m)
    p = np.zeros(m)
    free = np.flatnonzero(caps > TINY_CAP)
    if len(free) == 0:
        return _report(problem, r, p, 0, 0.0, True, rate)
    if not np.all(np.isfinite(caps[free])):
        raise UnboundedProblem("an edge is limited by neither power nor rate caps")
    P = np.array([power_value(q) for q in problem.power])
    f = np.array(problem.f, dtype=float)
    g = np.array(problem.g, dtype=float)
    n = len(free)
    ft, fh = tail[free], head[free]
    pw = [k for k in range(n) if math.isfinite(P[ft[k]])]  # edges carrying a power variable
    npw = len(pw)
    col = {k: n + a for a, k in enumerate(pw)}
    nv = n + npw

    rows, rhs = [-np.eye(nv)], [np.zeros(nv)]
    for cap, idx, size in ((f, ft, len(problem.left)), (g, fh, len(problem.right))):
        for a in range(size):
            if math.isfinite(cap[a]) and np.any(idx == a):
                row = np.zeros(nv)
                row[:n] = idx == a
                rows.append(row[None, :])
                rhs.append(cap[a:a + 1])
    for i in range(len(problem.left)):
        ks = [k for k in pw if ft[k] == i]
        if ks:
            row = np.zeros(nv)
            row[[col[k] for k in ks]] = 1.0
            rows.append(row[None, :])
            rhs.append(P[i:i + 1])
    lin = _barrier.Linear(np.vstack(rows), np.concatenate(rhs))

    receivers = [[k for k in pw if fh[k] == j] for j in range(len(problem.right))]
    subsets = [[k] for k in pw] + [ks for ks in receivers if len(ks) > 1]

    deg_l = np.bincount(ft, minlength=len(problem.left))
    deg_r = np.bincount(fh, minlength=len(problem.right))
    p0 = np.zeros(n)
    p0[pw] = 0.5 * P[ft[pw]] / deg_l[ft[pw]]
    fanin = np.array([max(1, len(receivers[fh[k]])) for k in range(n)])
    r0 = np.minimum(f[ft] / deg_l[ft], g[fh] / deg_r[fh])
    r0[pw] = np.minimum(r0[pw], np.log2(1 + p0[pw]) / fanin[pw])
    x0 = np.concatenate([0.5 * r0, p0[pw]])

    iters, res = 0, None
    for _ in range(max_cuts):
        A = np.zeros((len(subsets), nv))
        B = np.zeros((len(subsets), nv))
        for a, S in enumerate(subsets):
            A[a, S] = 1.0
            B[a, [col[k] for k in S]] = 1.0
        res = _barrier.maximize(np.r_[np.ones(n), np.zeros(npw)], [lin, _barrier.LogCap(A, B)], x0,
                                eps=epsilon, max_iter=max_iter - iters)
        iters += res.iterations
        rr, pp = res.x[:n], np.zeros(n)
        pp[pw] = res.x[n:]
        added = False
        for ks in receivers:
            S = _most_violated(ks, rr, pp, 1e-12)
            if S is not None and S not in subsets:
                subsets.append(S)
                added = True
        if not added or iters >= max_iter:
            break
    r[free] = np.maximum(res.x[:n], 0.0)
    p[free[pw]] = np.maximum(res.x[n:], 0.0)
    unb = np.array([k for k in range(n) if k not in col], dtype=int)
    if len(unb):
        p[free[unb]] = rate.invert(r[free[unb]])
    return _report(problem, r, p, iters, res.gap, res.converged and iters < max_iter, rate)


def cut_capacity(net: LayeredNetwork, cut: Sequence[tuple[str, str]], rate: RateFunction = LOG2) -> float:
    """Sum over cut edges of ``log2(1 + P_u)``, i.e. each tail spends its whole budget on that edge.

    Raises
    ------
    NetworkError
        If removing ``cut`` leaves a source -> destination path.
    """
    cut = [tuple(e) for e in cut]
    edges = set(net.edges)
    missing = [e for e in cut if e not in edges]
    if missing:
        raise NetworkError(f"cut edges not in network: {missing}")
    rest = edges - set(cut)
    seen, stack = {net.source}, [net.source]
    while stack:
        u = stack.pop()
        for a, b in rest:
            if a == u and b not in seen:
                seen.add(b)
                stack.append(b)
    if net.destination in seen:
        raise NotACut("removing the edges leaves a source-destination path")
    return float(sum(rate.evaluate(power_value(net.power[u])) for u, _ in cut))


class NotACut(NetworkError):
    pass
