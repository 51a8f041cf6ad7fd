"""Online transmission under causally revealed energy arrivals.

Nodes harvest energy over time; ``B_o`` bits must cross the network.  The lazy policy
waits, doubling a time counter until waiting longer cannot be worse than twice the
best offline completion time, then transmits at constant power over one window.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Union

import numpy as np

from .flowmax import flowmax_multilayer
from .layer_solver import DEFAULT_EPSILON
from .network import DagNetwork, LayeredNetwork, NetworkError, dag_to_layered, is_unbounded

HORIZON_FACTOR = 2**20

Net = Union[DagNetwork, LayeredNetwork]


class HorizonExceeded(RuntimeError):
    pass


class UnknownNode(NetworkError):
    pass


@dataclass(frozen=True)
class ArrivalSequence:
    """Energy arrivals ``(instant, node, energy)`` sorted by ``(instant, node)``.

    ``nodes`` optionally fixes the set of valid node ids.
    """

    events: tuple[tuple[float, str, float], ...]
    nodes: frozenset[str] | None = None

    def __post_init__(self):
        ev = tuple(sorted(((float(t), str(k), float(e)) for t, k, e in self.events), key=lambda x: (x[0], x[1])))
        for t, k, e in ev:
            if not (t > 0 and math.isfinite(t)):
                raise ValueError(f"arrival instant must be positive and finite, got {t}")
            if not (e > 0 and math.isfinite(e)):
                raise ValueError(f"arrival energy must be positive and finite, got {e}")
            if self.nodes is not None and k not in self.nodes:
                raise UnknownNode(f"arrival at unknown node {k!r}")
        object.__setattr__(self, "events", ev)
        if self.nodes is not None:
            object.__setattr__(self, "nodes", frozenset(self.nodes))

    @classmethod
    def for_network(cls, net: Net, events: Iterable) -> "ArrivalSequence":
        return cls(tuple(events), frozenset(net.nodes))

    @property
    def instants(self) -> list[float]:
        return sorted({t for t, _, _ in self.events})

    @property
    def first(self) -> float:
        return self.events[0][0]

    def energy_until(self, t: float) -> dict[str, float]:
        """``A_k(t)`` for every node with arrivals (inclusive of events at ``t``)."""
        out: dict[str, float] = {}
        for tau, k, e in self.events:
            if tau > t:
                break
            out[k] = out.get(k, 0.0) + e
        return out

    def to_dict(self) -> dict:
        return {"events": [{"t": t, "node": k, "energy": e} for t, k, e in self.events]}


def accumulate(arrivals: ArrivalSequence, k: str, t: float) -> float:
    """Energy harvested by node ``k`` up to and including time ``t``."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    if arrivals.nodes is not None and k not in arrivals.nodes:
        raise UnknownNode(f"unknown node {k!r}")
    return float(sum(e for tau, kk, e in arrivals.events if kk == k and tau <= t))


def load_arrivals(path: str | Path, net: Net | None = None) -> ArrivalSequence:
    raw = json.loads(Path(path).read_text())
    events = [(ev["t"], ev["node"], ev["energy"]) for ev in raw["events"]]
    return ArrivalSequence(tuple(events), frozenset(net.nodes) if net is not None else None)


def save_arrivals(arrivals: ArrivalSequence, path: str | Path) -> None:
    Path(path).write_text(json.dumps(arrivals.to_dict(), indent=2) + "\n")


class RateOracle:
    """Memoised max-flow of ``net`` under per-node budgets ``A_k / duration``.

    Nodes without arrivals get zero power; pass-through (unbounded) nodes stay unbounded.
    """

    def __init__(self, net: Net, epsilon: float = DEFAULT_EPSILON,
                 solver: Callable[..., object] = flowmax_multilayer):
        self.net = dag_to_layered(net) if isinstance(net, DagNetwork) else net
        self.epsilon = epsilon
        self.solver = solver
        self._finite = [v for v in self.net.nodes if not is_unbounded(self.net.power[v])]
        self._cache: dict[tuple, object] = {}

    def solve(self, energy: dict[str, float], duration: float):
        """Flow solution, or ``None`` when the source has no energy."""
        if energy.get(self.net.source, 0.0) <= 0:
            return None
        budgets = self._budgets(energy, duration)
        if budgets not in self._cache:
            self._cache[budgets] = self.solver(self.network(energy, duration), self.epsilon)
        return self._cache[budgets]

    def _budgets(self, energy, duration):
        return tuple(energy.get(v, 0.0) / duration for v in self._finite)

    def network(self, energy: dict[str, float], duration: float) -> LayeredNetwork:
        """``net`` with every finite budget replaced by ``energy / duration``."""
        return self.net.with_power(dict(zip(self._finite, self._budgets(energy, duration))))

    def rate(self, energy: dict[str, float], duration: float) -> float:
        sol = self.solve(energy, duration)
        return 0.0 if sol is None else float(sol.flow)


def r_star(net: Net, arrivals: ArrivalSequence, t_prime: float, delta_t: float, s: float,
           epsilon: float = DEFAULT_EPSILON, oracle: RateOracle | None = None) -> float:
    """Best constant-power rate over a window of length ``delta_t`` starting at ``t_prime``
    when only the energy harvested up to ``s`` may be spent."""
    if s > t_prime:
        raise ValueError("energy horizon s must not exceed the start time")
    if delta_t <= 0:
        raise ValueError("window length must be positive")
    oracle = oracle or RateOracle(net, epsilon)
    return oracle.rate(arrivals.energy_until(s), delta_t)


@dataclass
class LazySchedule:
    t_min: float
    completion: float
    allocation: dict[tuple[str, str], float]
    history: list[tuple[float, float]]
    delta: float
    counter: float = 0.0
    rate: float = 0.0
    energy: dict[str, float] = field(default_factory=dict)

    @property
    def bits(self) -> float:
        return self.t_min * self.rate


def _bisect(phi: Callable[[float], float], target: float, lo: float, hi: float, delta: float) -> float:
    """Smallest ``t`` in ``(lo, hi]`` with ``phi(t) >= target``, to within ``delta``; assumes ``phi(hi) >= target``."""
    while hi - lo > delta:
        mid = 0.5 * (lo + hi)
        if phi(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def lazy_online(net: Net, arrivals: ArrivalSequence, B_o: float, delta: float,
                horizon: float | None = None, energy: str = "counter",
                epsilon: float = DEFAULT_EPSILON, oracle: RateOracle | None = None) -> LazySchedule:
    """Run the lazy online policy.

    Parameters
    ----------
    B_o : float
        Bits to deliver, in rate x time units.
    delta : float
        Accuracy of the start-time line search.
    horizon : float, optional
        Give up once the counter passes this time (default ``2**20`` x first arrival).
    energy : {"counter", "current"}
        Energy used when evaluating a candidate start ``t'``: what was known when the
        counter fired (``A(c)``), or everything harvested by ``t'`` (``A(t')``).

    Returns
    -------
    LazySchedule
        Transmission at constant power over ``[t_min, 2 t_min]``.

    Raises
    ------
    HorizonExceeded
        If the counter passes ``horizon`` without the trigger firing.
    """
    if B_o < 0 or delta <= 0:
        raise ValueError("need B_o >= 0 and delta > 0")
    if energy not in ("counter", "current"):
        raise ValueError(f"unknown energy convention {energy!r}")
    if B_o == 0:
        return LazySchedule(0.0, 0.0, {}, [], delta)
    if not arrivals.events:
        raise HorizonExceeded("no energy ever arrives")
    oracle = oracle or RateOracle(net, epsilon)
    instants = arrivals.instants
    horizon = horizon if horizon is not None else HORIZON_FACTOR * arrivals.first
    c = arrivals.first
    history = []
    while True:
        A = arrivals.energy_until(c)
        check = 2 * c * oracle.rate(A, 2 * c)
        history.append((c, check))
        if check >= B_o:
            break
        later = [t for t in instants if t > c]
        c = min(2 * c, later[0]) if later else 2 * c
        if c > horizon:
            raise HorizonExceeded(f"counter passed horizon {horizon:g} without reaching {B_o:g} bits")

    def energy_at(t):
        return A if energy == "counter" else arrivals.energy_until(t)

    def phi(t):
        return t * oracle.rate(energy_at(t), t)

    t_min = c if phi(c) >= B_o else _bisect(phi, B_o, c, 2 * c, delta)
    E = energy_at(t_min)
    sol = oracle.solve(E, t_min)
    alloc = {} if sol is None else {e: float(p) for e, p in sol.powers.items()}
    rate = 0.0 if sol is None else float(sol.flow)
    return LazySchedule(t_min, 2 * t_min, alloc, history, delta, c, rate, dict(E))


def offline_lower_bound(net: Net, arrivals: ArrivalSequence, B_o: float, delta: float,
                        horizon: float | None = None, epsilon: float = DEFAULT_EPSILON,
                        oracle: RateOracle | None = None) -> float:
    """Smallest ``t`` with ``t * R*(t, t, t) >= B_o``, to within ``delta``.

    ``F(t) = t * R*(t, t, t)`` only grows: between arrivals the energy is fixed and
    ``t log(1 + A/t)`` increases, and arrivals add energy.  Each inter-arrival interval
    is checked at its right end and bisected once it contains the crossing.  No offline
    schedule finishes earlier.
    """
    if B_o < 0 or delta <= 0:
        raise ValueError("need B_o >= 0 and delta > 0")
    if B_o == 0:
        return 0.0
    if not arrivals.events:
        raise HorizonExceeded("no energy ever arrives")
    oracle = oracle or RateOracle(net, epsilon)
    horizon = horizon if horizon is not None else HORIZON_FACTOR * arrivals.first
    instants = arrivals.instants

    def F(t, A):
        return t * oracle.rate(A, t)

    for j, tau in enumerate(instants):
        A = arrivals.energy_until(tau)
        if F(tau, A) >= B_o:
            return tau
        if j + 1 < len(instants):
            nxt = instants[j + 1]
            if F(nxt, A) >= B_o:
                return _bisect(lambda t: F(t, A), B_o, tau, nxt, delta)
    lo, hi = instants[-1], 2 * instants[-1]
    while F(hi, A) < B_o:
        lo, hi = hi, 2 * hi
        if lo > horizon:
            raise HorizonExceeded(f"offline bound exceeds horizon {horizon:g}")
    return _bisect(lambda t: F(t, A), B_o, lo, hi, delta)


@dataclass
class RatioResult:
    ratio: float
    lazy: LazySchedule
    lower_bound: float

    @property
    def bound(self) -> float:
        return 2 + 2 * self.lazy.delta / self.lower_bound


def competitive_ratio_estimate(net: Net, arrivals: ArrivalSequence, B_o: float, delta: float,
                               energy: str = "counter", epsilon: float = DEFAULT_EPSILON,
                               horizon: float | None = None) -> RatioResult:
    """``T_lazy / T_lb``: an upper bound on the lazy policy's ratio against the best offline schedule."""
    oracle = RateOracle(net, epsilon)
    lazy = lazy_online(net, arrivals, B_o, delta, horizon=horizon, energy=energy, oracle=oracle)
    T_lb = offline_lower_bound(net, arrivals, B_o, delta, horizon=horizon, oracle=oracle)
    ratio = lazy.completion / T_lb if T_lb > 0 else (0.0 if lazy.completion == 0 else math.inf)
    return RatioResult(ratio, lazy, T_lb)


def random_arrivals(net: Net, rng: np.random.Generator, n_events: int = 6, rate: float = 1.0,
                    mean_energy: float = 5.0, nodes: list[str] | None = None) -> ArrivalSequence:
    """Poisson-like stream: exponential gaps, exponential energies, uniformly chosen nodes."""
    if nodes is None:
        finite = [v for v in net.nodes if not is_unbounded(net.power[v]) and v != net.destination]
        nodes = finite
    t = np.cumsum(rng.exponential(1.0 / rate, size=n_events))
    who = rng.choice(len(nodes), size=n_events)
    E = rng.exponential(mean_energy, size=n_events)
    # the source always receives the first event so that some flow is possible early
    who[0] = nodes.index(net.source)
    return ArrivalSequence(tuple((float(a), nodes[i], float(e)) for a, i, e in zip(t, who, E)), frozenset(net.nodes))
