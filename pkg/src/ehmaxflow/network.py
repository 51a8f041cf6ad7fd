"""DAG and layered network types, validation, and the DAG -> layered transform."""
from __future__ import annotations

import enum
import json
import math
import warnings
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence, Union


class _Unbounded(enum.Enum):
    UNBOUNDED = "unbounded"

    def __repr__(self) -> str:
        return "UNBOUNDED"


UNBOUNDED = _Unbounded.UNBOUNDED
Power = Union[float, _Unbounded]


class NetworkError(ValueError):
    pass


class ParseError(NetworkError):
    pass


class CycleDetected(NetworkError):
    def __init__(self, cycle: Sequence[str]):
        self.cycle = list(cycle)
        super().__init__("cycle detected: " + " -> ".join(self.cycle))


class MissingSourceOrDestination(NetworkError):
    pass


class NegativePower(NetworkError):
    pass


class DuplicateEdge(NetworkError):
    pass


def is_unbounded(p: Power) -> bool:
    return p is UNBOUNDED


def power_value(p: Power) -> float:
    """Numeric view of a budget (``inf`` for UNBOUNDED)."""
    return math.inf if p is UNBOUNDED else float(p)


def _freeze(d: Mapping) -> Mapping:
    return MappingProxyType(dict(d))


def _adjacency(edges: Iterable[tuple[str, str]]):
    out, inn = defaultdict(list), defaultdict(list)
    for u, v in edges:
        out[u].append(v)
        inn[v].append(u)
    return out, inn


@dataclass(frozen=True)
class DagNetwork:
    nodes: tuple[str, ...]
    power: Mapping[str, Power]
    edges: tuple[tuple[str, str], ...]
    source: str
    destination: str

    def __post_init__(self):
        object.__setattr__(self, "power", _freeze(self.power))

    def __reduce__(self):
        # mapping proxies do not pickle; rebuild from plain dicts
        return (DagNetwork, (self.nodes, dict(self.power), self.edges, self.source, self.destination))

    def out_neighbors(self, u: str) -> list[str]:
        return [b for a, b in self.edges if a == u]

    def in_neighbors(self, v: str) -> list[str]:
        return [a for a, b in self.edges if b == v]

    def with_power(self, updates: Mapping[str, Power]) -> "DagNetwork":
        p = dict(self.power)
        for k, v in updates.items():
            if k not in p:
                raise NetworkError(f"unknown node {k!r}")
            p[k] = v
        return DagNetwork(self.nodes, p, self.edges, self.source, self.destination)

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n, "power": _power_to_json(self.power[n])} for n in self.nodes],
            "edges": [list(e) for e in self.edges],
            "source": self.source,
            "destination": self.destination,
        }


DUMMY = None  # origin of dummy nodes in LayeredNetwork.origin


@dataclass(frozen=True)
class LayeredNetwork:
    """Layers L_0 = {source}, ..., L_{K+1} = {destination}; edges only join consecutive layers.

    ``origin`` maps every layered node to its DAG node (``DUMMY`` for pass-through copies),
    ``edge_origin`` maps every layered edge to the DAG edge whose chain it belongs to.
    """

    layers: tuple[tuple[str, ...], ...]
    power: Mapping[str, Power]
    edges: tuple[tuple[str, str], ...]
    origin: Mapping[str, str | None] = field(default_factory=dict)
    edge_origin: Mapping[tuple[str, str], tuple[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "power", _freeze(self.power))
        if not self.origin:
            object.__setattr__(self, "origin", {v: v for L in self.layers for v in L})
        if not self.edge_origin:
            object.__setattr__(self, "edge_origin", {e: e for e in self.edges})
        object.__setattr__(self, "origin", _freeze(self.origin))
        object.__setattr__(self, "edge_origin", _freeze(self.edge_origin))
        index = {}
        for k, L in enumerate(self.layers):
            for v in L:
                index[v] = k
        object.__setattr__(self, "_layer_of", index)
        for u, v in self.edges:
            if index[v] != index[u] + 1:
                raise NetworkError(f"edge {u}->{v} does not join consecutive layers")

    def __reduce__(self):
        return (LayeredNetwork, (self.layers, dict(self.power), self.edges, dict(self.origin), dict(self.edge_origin)))

    @property
    def K(self) -> int:
        return len(self.layers) - 2

    @property
    def source(self) -> str:
        return self.layers[0][0]

    @property
    def destination(self) -> str:
        return self.layers[-1][0]

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(v for L in self.layers for v in L)

    def layer_of(self, v: str) -> int:
        return self._layer_of[v]

    def dummies(self) -> list[str]:
        return [v for v, o in self.origin.items() if o is DUMMY]

    def out_edges(self, u: str) -> list[tuple[str, str]]:
        return [e for e in self.edges if e[0] == u]

    def in_edges(self, v: str) -> list[tuple[str, str]]:
        return [e for e in self.edges if e[1] == v]

    def layer_edges(self, k: int) -> list[tuple[str, str]]:
        """Edges from L_{k-1} to L_k."""
        left = set(self.layers[k - 1])
        return [e for e in self.edges if e[0] in left]

    def with_power(self, updates: Mapping[str, Power]) -> "LayeredNetwork":
        p = dict(self.power)
        for k, v in updates.items():
            if k not in p:
                raise NetworkError(f"unknown node {k!r}")
            p[k] = v
        return LayeredNetwork(self.layers, p, self.edges, self.origin, self.edge_origin)

    def as_dag(self) -> DagNetwork:
        return DagNetwork(self.nodes, self.power, self.edges, self.source, self.destination)


def _power_to_json(p: Power):
    return "unbounded" if p is UNBOUNDED else p


def _parse_power(node_id: str, raw) -> Power:
    if isinstance(raw, str):
        if raw.strip().lower() == "unbounded":
            return UNBOUNDED
        try:
            raw = float(raw)
        except ValueError:
            raise ParseError(f"node {node_id!r}: power must be a number or 'unbounded'") from None
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ParseError(f"node {node_id!r}: power must be a number or 'unbounded'")
    p = float(raw)
    if math.isnan(p):
        raise ParseError(f"node {node_id!r}: power is NaN")
    if p < 0:
        raise NegativePower(f"node {node_id!r} has negative power {p}")
    if math.isinf(p):
        return UNBOUNDED
    return p


def _find_cycle(nodes: Sequence[str], edges: Sequence[tuple[str, str]]) -> list[str] | None:
    out, _ = _adjacency(edges)
    color = {v: 0 for v in nodes}
    parent: dict[str, str] = {}
    for root in nodes:
        if color[root]:
            continue
        stack = [(root, iter(out[root]))]
        color[root] = 1
        while stack:
            v, it = stack[-1]
            w = next(it, None)
            if w is None:
                color[v] = 2
                stack.pop()
            elif color[w] == 0:
                color[w] = 1
                parent[w] = v
                stack.append((w, iter(out[w])))
            elif color[w] == 1:
                cyc = [v]
                while cyc[-1] != w:
                    cyc.append(parent[cyc[-1]])
                cyc.reverse()
                return cyc + [w]
    return None


def topological_order(nodes: Sequence[str], edges: Sequence[tuple[str, str]]) -> list[str]:
    out, inn = _adjacency(edges)
    indeg = {v: len(inn[v]) for v in nodes}
    q = deque(v for v in nodes if indeg[v] == 0)
    order = []
    while q:
        v = q.popleft()
        order.append(v)
        for w in out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                q.append(w)
    if len(order) != len(nodes):
        raise CycleDetected(_find_cycle(nodes, edges) or [])
    return order


def validate(raw: Mapping) -> DagNetwork:
    """Build a :class:`DagNetwork` from a parsed description.

    Nodes that lie on no source -> destination path are pruned with a warning.
    """
    if not isinstance(raw, Mapping):
        raise ParseError("network description must be an object")
    try:
        raw_nodes, raw_edges = raw["nodes"], raw["edges"]
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}") from None
    src, dst = raw.get("source"), raw.get("destination")

    power: dict[str, Power] = {}
    for item in raw_nodes:
        if isinstance(item, Mapping):
            nid, p = item.get("id"), item.get("power", 0.0)
        else:
            raise ParseError(f"node entry {item!r} must be an object with 'id' and 'power'")
        if not isinstance(nid, str):
            raise ParseError(f"node id {nid!r} must be a string")
        if nid in power:
            raise ParseError(f"duplicate node id {nid!r}")
        power[nid] = _parse_power(nid, p)
    nodes = list(power)

    if src is None or dst is None or src not in power or dst not in power:
        raise MissingSourceOrDestination(f"source {src!r} / destination {dst!r} not among nodes")
    if src == dst:
        raise MissingSourceOrDestination("source and destination coincide")

    edges: list[tuple[str, str]] = []
    seen = set()
    for item in raw_edges:
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise ParseError(f"edge {item!r} must be a pair of node ids")
        u, v = item
        if u not in power or v not in power:
            raise ParseError(f"edge {u}->{v} references an unknown node")
        if u == v:
            raise CycleDetected([u, u])
        if (u, v) in seen:
            raise DuplicateEdge(f"duplicate edge {u}->{v}")
        if v == src:
            raise NetworkError(f"edge {u}->{v} enters the source")
        if u == dst:
            raise NetworkError(f"edge {u}->{v} leaves the destination")
        seen.add((u, v))
        edges.append((u, v))

    topological_order(nodes, edges)

    # prune nodes not on any s -> d path
    out, inn = _adjacency(edges)
    fwd = _reach(src, out)
    bwd = _reach(dst, inn)
    keep = [v for v in nodes if v in fwd and v in bwd]
    if dst not in fwd:
        raise MissingSourceOrDestination(f"destination {dst!r} unreachable from source {src!r}")
    dropped = [v for v in nodes if v not in keep]
    if dropped:
        warnings.warn(f"pruning nodes not on any source-destination path: {dropped}", stacklevel=2)
    keep_set = set(keep)
    edges = [e for e in edges if e[0] in keep_set and e[1] in keep_set]
    return DagNetwork(tuple(keep), {v: power[v] for v in keep}, tuple(edges), src, dst)


def _reach(start: str, adj) -> set[str]:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def parse_network(text: str) -> DagNetwork:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return validate(raw)


def load_network(path: str | Path) -> DagNetwork:
    return parse_network(Path(path).read_text())


def save_network(net: DagNetwork, path: str | Path) -> None:
    Path(path).write_text(json.dumps(net.to_dict(), indent=2) + "\n")


def dag_to_layered(dag: DagNetwork) -> LayeredNetwork:
    """Layer by longest-path distance from the source; bridge skipped layers with dummies.

    A dummy on edge (u, v) at layer l is named ``u~v@l`` and has UNBOUNDED power.
    """
    order = topological_order(dag.nodes, dag.edges)
    depth = {v: 0 for v in dag.nodes}
    _, inn = _adjacency(dag.edges)
    for v in order:
        for u in inn[v]:
            depth[v] = max(depth[v], depth[u] + 1)
    # every node reaches d and is reached from s, so s and d are alone at the extremes
    n_layers = depth[dag.destination] + 1
    layers: list[list[str]] = [[] for _ in range(n_layers)]
    for v in order:
        layers[depth[v]].append(v)
    power = dict(dag.power)
    origin: dict[str, str | None] = {v: v for v in dag.nodes}
    edges, edge_origin = [], {}
    taken = set(dag.nodes)
    for u, v in dag.edges:
        chain = [u]
        for l in range(depth[u] + 1, depth[v]):
            name = f"{u}~{v}@{l}"
            while name in taken:
                name += "'"
            taken.add(name)
            layers[l].append(name)
            power[name] = UNBOUNDED
            origin[name] = DUMMY
            chain.append(name)
        chain.append(v)
        for a, b in zip(chain, chain[1:]):
            edges.append((a, b))
            edge_origin[(a, b)] = (u, v)
    return LayeredNetwork(tuple(tuple(L) for L in layers), power, tuple(edges), origin, edge_origin)


def is_layer_connected(net: LayeredNetwork, k: int) -> bool:
    """True iff the nodes of L_k are linked to each other through shared predecessors in L_{k-1}."""
    if not 1 <= k <= net.K:
        raise ValueError(f"layer index {k} outside 1..{net.K}")
    layer = net.layers[k]
    preds = {v: {u for u, _ in net.in_edges(v)} for v in layer}
    seen = {layer[0]}
    stack = [layer[0]]
    while stack:
        v = stack.pop()
        for w in layer:
            if w not in seen and preds[v] & preds[w]:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(layer)


def layered_from_lists(layers: Sequence[Sequence[str]], edges: Iterable[tuple[str, str]],
                       power: Mapping[str, Power]) -> LayeredNetwork:
    """Convenience constructor; missing destination power defaults to 0."""
    p = {v: power.get(v, 0.0) for L in layers for v in L}
    return LayeredNetwork(tuple(tuple(L) for L in layers), p, tuple(edges))
