"""Named test networks, random generators and the bundled reference sweeps."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .network import UNBOUNDED, DagNetwork, LayeredNetwork, is_layer_connected, layered_from_lists, validate

DATA = Path(__file__).resolve().parents[2] / "data"

RELAY_LAYERS = (("s",), ("2", "3"), ("4", "5"), ("d",))
RELAY_EDGES = (("s", "2"), ("s", "3"), ("2", "4"), ("2", "5"), ("3", "4"), ("3", "5"), ("4", "d"), ("5", "d"))
# relay budgets that reproduce the bundled orthogonal-link sweep
RELAY_DEFAULTS = {"2": 4.0, "3": 5.0, "4": 30.0}


def relay_network(P_s: float, P_5: float, P_2: float = 4.0, P_3: float = 5.0, P_4: float = 30.0) -> LayeredNetwork:
    """Source, two fully connected relay pairs, destination."""
    return layered_from_lists(RELAY_LAYERS, RELAY_EDGES, {"s": P_s, "2": P_2, "3": P_3, "4": P_4, "5": P_5, "d": 0.0})


def mac_relay_network(P_2_label: float, P_3_label: float, P_5: float) -> LayeredNetwork:
    """Relay network for the interfering-link sweep, keyed by the sweep's curve labels.

    The bundled coordinates are reproduced with source budget 10 and first-layer budgets
    one below the curve labels.
    """
    return relay_network(10.0, P_5, P_2_label - 1.0, P_3_label - 1.0)


def cut_gap_network(P_a: float, P_b: float, P_c: float) -> DagNetwork:
    """``a -> {b, c} -> d``: a weak relay ``b`` next to a strong relay ``c``."""
    return validate({
        "nodes": [{"id": "a", "power": P_a}, {"id": "b", "power": P_b}, {"id": "c", "power": P_c},
                  {"id": "d", "power": 0}],
        "edges": [["a", "b"], ["a", "c"], ["b", "d"], ["c", "d"]],
        "source": "a", "destination": "d",
    })


def skip_dag(power: float = 3.0) -> DagNetwork:
    """Chain ``a -> b -> c -> d`` with the shortcuts ``a -> c`` and ``b -> d``."""
    return validate({
        "nodes": [{"id": v, "power": power} for v in "abc"] + [{"id": "d", "power": 0}],
        "edges": [["a", "b"], ["b", "c"], ["c", "d"], ["a", "c"], ["b", "d"]],
        "source": "a", "destination": "d",
    })


def two_node(P_s: float = 0.0) -> LayeredNetwork:
    return layered_from_lists((("s",), ("d",)), (("s", "d"),), {"s": P_s, "d": 0.0})


def chain(powers) -> LayeredNetwork:
    """``s -> n1 -> ... -> d`` with ``powers`` for ``s, n1, ...``."""
    names = ["s"] + [f"n{i}" for i in range(1, len(powers))] + ["d"]
    layers = [(v,) for v in names]
    p = dict(zip(names, powers))
    return layered_from_lists(layers, list(zip(names, names[1:])), p)


def random_layered(rng: np.random.Generator, K: int, max_width: int = 4, lo: float = 0.1, hi: float = 30.0,
                   p_edge: float = 0.4, layer_connected: bool = True, max_tries: int = 10_000) -> LayeredNetwork:
    """Random layered network with ``K`` relay layers of 1..``max_width`` nodes.

    Every node gets at least one in- and one out-edge; extra edges appear with
    probability ``p_edge``; budgets are uniform on ``[lo, hi]``.  With
    ``layer_connected`` draws are repeated until every layer is layer connected.
    """
    for _ in range(max_tries):
        layers = [["s"]] + [[f"{k}_{i}" for i in range(int(rng.integers(1, max_width + 1)))]
                            for k in range(1, K + 1)] + [["d"]]
        edges = set()
        for k in range(K + 1):
            A, B = layers[k], layers[k + 1]
            for a in A:
                edges.add((a, B[int(rng.integers(len(B)))]))
            for b in B:
                edges.add((A[int(rng.integers(len(A)))], b))
            for a in A:
                for b in B:
                    if rng.random() < p_edge:
                        edges.add((a, b))
        power = {v: float(rng.uniform(lo, hi)) for L in layers[:-1] for v in L}
        power["d"] = 0.0
        net = layered_from_lists(layers, sorted(edges), power)
        if not layer_connected or all(is_layer_connected(net, k) for k in range(1, K + 1)):
            return net
    raise RuntimeError("no layer-connected draw found")


def finite_edge_count(net) -> int:
    return sum(1 for u, _ in net.edges if net.power[u] is not UNBOUNDED)


def load_relay_sweep(path: Path | None = None) -> list[tuple[float, float, float]]:
    """Rows ``(P_s, P_5, maxflow)`` of the orthogonal-link reference sweep."""
    with open(path or DATA / "reference" / "relay_sweep.csv") as fh:
        return [(float(r["P_s"]), float(r["P_5"]), float(r["maxflow"])) for r in csv.DictReader(fh)]


def load_mac_sweep(path: Path | None = None) -> list[tuple[float, float, float, float]]:
    """Rows ``(P_2 label, P_3 label, P_5, maxflow)`` of the interfering-link reference sweep."""
    with open(path or DATA / "reference" / "mac_sweep.csv") as fh:
        return [(float(r["P_2"]), float(r["P_3"]), float(r["P_5"]), float(r["maxflow"])) for r in csv.DictReader(fh)]
