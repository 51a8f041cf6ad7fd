"""Reference solvers for verification: a whole-network convex solve and a brute-force grid.

Neither shares code with the layer solver; the direct solve goes through cvxpy.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Union

import cvxpy as cp
import numpy as np

from .layer_solver import LOG2, RateFunction
from .network import DagNetwork, LayeredNetwork, power_value

LN2 = math.log(2.0)
Net = Union[DagNetwork, LayeredNetwork]


class NonConvergence(RuntimeError):
    pass


class TooLarge(ValueError):
    pass


@dataclass
class OracleReport:
    flow: float
    rates: dict[tuple[str, str], float]
    method: str
    powers: dict[tuple[str, str], float] = field(default_factory=dict)
    resolution: float | None = None
    certified_gap: float | None = None


def _dual_bound(edges, nodes, source, dest, power, nu, lam) -> float:
    """Lagrangian dual value for multipliers ``nu`` (conservation) and ``lam`` (budgets).

    The inner supremum separates per edge: ``sup_r w r - lam_u (2**r - 1)``.
    """
    total = 0.0
    for u in nodes:
        if u != dest and math.isfinite(power[u]):
            total += lam[u] * power[u]
    for (u, v) in edges:
        w = (1.0 if v == dest else nu.get(v, 0.0)) - (nu.get(u, 0.0) if u != source else 0.0)
        if w <= 0:
            continue
        a = lam.get(u, 0.0) * LN2 if math.isfinite(power[u]) else 0.0
        if a <= 0:
            return math.inf
        r = max(0.0, math.log2(w / a))
        total += w * r - lam[u] * (2.0**r - 1.0)
    return total


def direct_maxflow(net: Net, epsilon: float = 1e-6, mac: bool = False) -> OracleReport:
    """Solve the whole max-flow problem jointly in rate space.

    Constraints: ``sum_j (2**r_kj - 1) <= P_k`` per node with a finite budget and
    ``sum_in r >= sum_out r`` at every relay; the objective is the rate into the
    destination.  With ``mac=True`` powers become variables and every relay receiver
    (not the destination) gets the Gaussian-MAC region over its finite-power senders.

    The certified gap (non-MAC only) is the distance to the Lagrangian dual bound
    built from the solver's multipliers.
    """
    edges = list(net.edges)
    nodes = list(net.nodes)
    s, d = net.source, net.destination
    P = {u: power_value(net.power[u]) for u in nodes}
    col = {e: k for k, e in enumerate(edges)}
    out = {u: [col[e] for e in edges if e[0] == u] for u in nodes}
    inn = {u: [col[e] for e in edges if e[1] == u] for u in nodes}
    n = len(edges)
    r = cp.Variable(n, nonneg=True)
    cons, budget, conserve = [], {}, {}
    if mac:
        fin = [k for k, e in enumerate(edges) if math.isfinite(P[e[0]])]
        p = cp.Variable(n, nonneg=True)
        for u in nodes:
            if out[u] and math.isfinite(P[u]):
                cons.append(cp.sum(p[out[u]]) <= P[u])
        for k in fin:
            cons.append(r[k] <= cp.log(1 + p[k]) / LN2)
        for v in nodes:
            if v == d:
                continue
            ks = [k for k in inn[v] if k in set(fin)]
            for size in range(2, len(ks) + 1):
                for S in itertools.combinations(ks, size):
                    S = list(S)
                    cons.append(cp.sum(r[S]) <= cp.log(1 + cp.sum(p[S])) / LN2)
    else:
        for u in nodes:
            if out[u] and math.isfinite(P[u]):
                budget[u] = cp.sum(cp.exp(r[out[u]] * LN2)) - len(out[u]) <= P[u]
                cons.append(budget[u])
    for v in nodes:
        if v not in (s, d) and out[v]:
            conserve[v] = cp.sum(r[inn[v]]) >= cp.sum(r[out[v]])
            cons.append(conserve[v])
    if all(not math.isfinite(P[u]) for u in nodes if out[u]):
        raise NonConvergence("no finite budget: the flow is unbounded")
    prob = cp.Problem(cp.Maximize(cp.sum(r[inn[d]])), cons)
    try:
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=epsilon * 1e-2, tol_gap_rel=epsilon * 1e-2, tol_feas=1e-9)
    except cp.SolverError as exc:
        raise NonConvergence(str(exc)) from None
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or r.value is None:
        raise NonConvergence(f"direct solve ended with status {prob.status}")
    rv = np.maximum(np.asarray(r.value, dtype=float), 0.0)
    rates = {e: float(rv[k]) for k, e in enumerate(edges)}
    flow = float(rv[inn[d]].sum())
    if mac:
        pv = np.maximum(np.asarray(p.value, dtype=float), 0.0)
        powers = {e: (float(pv[k]) if math.isfinite(P[e[0]]) else float(2.0 ** rv[k] - 1)) for k, e in enumerate(edges)}
        gap = None
    else:
        powers = {e: float(2.0 ** rv[k] - 1.0) for k, e in enumerate(edges)}
        nu = {v: float(c.dual_value) for v, c in conserve.items()}
        lam = {u: float(c.dual_value) for u, c in budget.items()}
        gap = _dual_bound(edges, nodes, s, d, P, nu, lam) - flow
    return OracleReport(flow, rates, "direct", powers=powers, certified_gap=gap)


def _simplex_grid(total: float, parts: int, resolution: float) -> np.ndarray:
    """All splits of ``total`` into ``parts`` nonnegative multiples of ``total / N``, ``N ~ total / resolution``."""
    N = max(1, int(round(total / resolution)))
    if parts == 1:
        return np.array([[total]])
    pts = [c for c in itertools.combinations(range(N + parts - 1), parts - 1)]
    bars = np.array(pts, dtype=int)
    bounds = np.hstack([-np.ones((len(bars), 1), dtype=int), bars, np.full((len(bars), 1), N + parts - 1)])
    counts = np.diff(bounds, axis=1) - 1
    return counts * (total / N)


def _grid_size(N: int, parts: int) -> int:
    return math.comb(N + parts - 1, parts - 1)


def grid_maxflow(net: Net, resolution: float = 1e-3, max_points: int = 20_000_000,
                 rate: RateFunction = LOG2, chunk: int = 200_000) -> OracleReport:
    """Exhaustive search over per-node power splits at ``resolution`` watts.

    For each split, edge capacities are fixed and the flow is the classical max-flow,
    computed as the minimum over all source/destination cuts.  The reported flow is a
    lower bound on the optimum; each edge power lies within ``resolution`` of any
    split, so the optimum exceeds it by at most ``#edges * resolution / ln 2``.
    """
    edges = list(net.edges)
    nodes = list(net.nodes)
    s, d = net.source, net.destination
    P = {u: power_value(net.power[u]) for u in nodes}
    out = {u: [k for k, e in enumerate(edges) if e[0] == u] for u in nodes}
    finite = [k for k, e in enumerate(edges) if math.isfinite(P[e[0]])]
    if len(finite) > 6:
        raise TooLarge(f"{len(finite)} finite-power edges; grid search supports at most 6")

    splitters = [u for u in nodes if len(out[u]) > 1 and math.isfinite(P[u]) and P[u] > 0]
    size = 1
    for u in splitters:
        size *= _grid_size(max(1, int(round(P[u] / resolution))), len(out[u]))
    if size > max_points:
        raise TooLarge(f"grid has {size} points (limit {max_points})")

    # cut incidence: cut_mat[k, c] = 1 if edge k crosses cut c forward
    mids = [v for v in nodes if v not in (s, d)]
    cuts = []
    for mask in range(2 ** len(mids)):
        S = {s} | {v for i, v in enumerate(mids) if mask >> i & 1}
        cuts.append([1.0 if (u in S and v not in S) else 0.0 for (u, v) in edges])
    cut_mat = np.array(cuts).T

    base = np.zeros(len(edges))
    for k, (u, v) in enumerate(edges):
        if not math.isfinite(P[u]):
            base[k] = np.inf
        elif len(out[u]) == 1:
            base[k] = rate.evaluate(P[u])
    grids = [_simplex_grid(P[u], len(out[u]), resolution) for u in splitters]

    best, best_caps = -1.0, None
    for combo in _chunked_product(grids, chunk):
        caps = np.tile(base, (len(combo[0]), 1))
        for u, g in zip(splitters, combo):
            caps[:, out[u]] = rate.evaluate(g)
        with np.errstate(invalid="ignore"):
            flow = np.min(np.where(cut_mat[None, :, :] > 0, caps[:, :, None], 0.0).sum(axis=1), axis=1)
        i = int(np.argmax(flow))
        if flow[i] > best:
            best, best_caps = float(flow[i]), caps[i]
    if not math.isfinite(best):
        raise TooLarge("unbounded flow: a cut consists of unbounded edges only")
    rates = {e: float(min(best_caps[k], best)) for k, e in enumerate(edges)}
    return OracleReport(best, rates, "grid", resolution=resolution)


def _chunked_product(grids, chunk):
    """Yield the Cartesian product of row sets as aligned arrays, ``chunk`` rows at a time."""
    if not grids:
        yield [np.zeros((1, 0))]
        return
    sizes = [len(g) for g in grids]
    total = int(np.prod(sizes))
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        sub = np.unravel_index(idx, sizes)
        yield [g[i] for g, i in zip(grids, sub)]
