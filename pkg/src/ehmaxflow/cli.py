"""Command-line front-end: ``maxflow``, ``sweep`` and ``simulate`` subcommands, CSV on stdout."""
from __future__ import annotations

import argparse
import csv
import itertools
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .flowmax import FlowSolution, maxflow
from .layer_solver import DEFAULT_EPSILON
from .network import DagNetwork, LayeredNetwork, NetworkError, dag_to_layered, load_network, power_value
from .online import HorizonExceeded, RateOracle, competitive_ratio_estimate, load_arrivals
from .oracle import NonConvergence

ENV_EPSILON = "EHMAXFLOW_EPSILON"
EXIT_PARSE, EXIT_NONCONVERGENCE, EXIT_HORIZON = 1, 2, 3


class UsageError(ValueError):
    pass


def fmt(x: float) -> str:
    """Six significant digits, ``.`` decimal separator."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if math.isnan(x):
        return "NaN"
    out = f"{x:.6g}"
    return "0" if out == "-0" else out


def resolve_epsilon(flag: float | None) -> float:
    """Flag, else ``EHMAXFLOW_EPSILON``, else the library default."""
    if flag is not None:
        eps = flag
    elif os.environ.get(ENV_EPSILON):
        try:
            eps = float(os.environ[ENV_EPSILON])
        except ValueError:
            raise UsageError(f"{ENV_EPSILON} is not a number: {os.environ[ENV_EPSILON]!r}") from None
    else:
        eps = DEFAULT_EPSILON
    if not eps > 0:
        raise UsageError("epsilon must be positive")
    return eps


def feasibility_slack(net: LayeredNetwork, sol: FlowSolution) -> float:
    """Largest violation of conservation, budgets and flow-value consistency (0 when feasible)."""
    worst = 0.0
    s, d = net.source, net.destination
    for v in net.nodes:
        if v != d:
            worst = max(worst, sol.out_power(v) - power_value(net.power[v]))
        if v not in (s, d):
            worst = max(worst, sol.out_rate(v) - sol.in_rate(v))
    for R in (sol.out_rate(s), sol.in_rate(d)):
        worst = max(worst, abs(R - sol.flow))
    worst = max(worst, -min(sol.rates.values(), default=0.0))
    return max(0.0, float(worst))


def _load(path: str) -> DagNetwork:
    try:
        return load_network(path)
    except OSError as exc:
        raise NetworkError(f"cannot read {path}: {exc.strerror}") from None


def parse_param(text: str) -> tuple[str, list[float]]:
    """``node:a:b:n`` (n evenly spaced values), ``node:a:b:n:log`` (geometric) or ``node:v1,v2,...``."""
    node, _, rest = text.partition(":")
    if not node or not rest:
        raise UsageError(f"bad --param {text!r}")
    parts = rest.split(":")
    try:
        if len(parts) == 1:
            values = [float(v) for v in parts[0].split(",") if v.strip()]
        elif len(parts) in (3, 4):
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1:
                raise UsageError(f"--param {text!r}: need at least one step")
            if len(parts) == 4:
                if parts[3] != "log" or a <= 0 or b <= 0:
                    raise UsageError(f"--param {text!r}: log spacing needs positive ends")
                values = list(np.geomspace(a, b, n)) if n > 1 else [a]
            else:
                values = list(np.linspace(a, b, n)) if n > 1 else [a]
        else:
            raise UsageError(f"bad --param {text!r}")
    except ValueError as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"bad --param {text!r}: {exc}") from None
    if not values or any(v < 0 or not math.isfinite(v) for v in values):
        raise UsageError(f"--param {text!r}: powers must be finite and nonnegative")
    return node, [float(v) for v in values]


# ---------------------------------------------------------------- maxflow

def cmd_maxflow(args, out) -> int:
    eps = resolve_epsilon(args.epsilon)
    dag = _load(args.network)
    net = dag_to_layered(dag)
    sol = maxflow(net, eps, mac=args.mac, method=args.method)
    slack = feasibility_slack(net, sol)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["maxflow", fmt(sol.flow)])
    w.writerow(["iterations", sol.iterations])
    w.writerow(["slack", fmt(slack)])
    w.writerow(["method", sol.method])
    w.writerow(["converged", fmt(sol.converged)])
    w.writerow([])
    w.writerow(["from", "to", "rate", "power"])
    for (u, v), r in sorted(_dag_edges(net, sol).items(), key=lambda kv: dag.edges.index(kv[0])):
        w.writerow([u, v, fmt(r[0]), fmt(r[1])])
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            cw = csv.writer(fh, lineterminator="\n")
            cw.writerow(["from", "to", "rate", "power"])
            for (u, v), r in _dag_edges(net, sol).items():
                cw.writerow([u, v, fmt(r[0]), fmt(r[1])])
    return 0 if sol.converged else EXIT_NONCONVERGENCE


def _dag_edges(net: LayeredNetwork, sol: FlowSolution) -> dict:
    """Per original edge: rate and transmit power of the first hop of its chain."""
    res = {}
    for e, orig in net.edge_origin.items():
        if e[0] == orig[0]:
            res[orig] = (sol.rates.get(e, 0.0), sol.powers.get(e, 0.0))
    return res


# ---------------------------------------------------------------- sweep

@dataclass(frozen=True)
class SweepRow:
    values: tuple[float, ...]
    flow: float
    iterations: int
    slack: float
    ok: bool


def _sweep_point(net: LayeredNetwork, nodes, values, eps, mac, method) -> SweepRow:
    try:
        sub = net.with_power(dict(zip(nodes, values)))
        sol = maxflow(sub, eps, mac=mac, method=method)
        return SweepRow(tuple(values), sol.flow, sol.iterations, feasibility_slack(sub, sol), sol.converged)
    except (NonConvergence, NetworkError, ArithmeticError, ValueError):
        return SweepRow(tuple(values), math.nan, 0, math.nan, False)


def run_sweep(net: LayeredNetwork, params: list[tuple[str, list[float]]], eps: float, mac: bool = False,
              method: str = "flowmax", jobs: int = 1) -> list[SweepRow]:
    """Cartesian sweep over the parameter grids, rows in grid order."""
    nodes = [n for n, _ in params]
    unknown = [n for n in nodes if n not in net.power]
    if unknown:
        raise UsageError(f"unknown node(s) in --param: {', '.join(unknown)}")
    grid = list(itertools.product(*(v for _, v in params)))
    if jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_point, itertools.repeat(net), itertools.repeat(nodes), grid,
                                 itertools.repeat(eps), itertools.repeat(mac), itertools.repeat(method),
                                 chunksize=max(1, len(grid) // (4 * jobs))))
    return [_sweep_point(net, nodes, g, eps, mac, method) for g in grid]


def cmd_sweep(args, out) -> int:
    eps = resolve_epsilon(args.epsilon)
    if not args.param:
        raise UsageError("sweep needs at least one --param")
    params = [parse_param(p) for p in args.param]
    net = dag_to_layered(_load(args.network))
    rows = run_sweep(net, params, eps, args.mac, args.method, args.jobs)
    w = csv.writer(out, lineterminator="\n")
    w.writerow([f"P_{n}" for n, _ in params] + ["maxflow", "iterations", "slack"])
    for row in rows:
        w.writerow([fmt(v) for v in row.values] + [fmt(row.flow), row.iterations, fmt(row.slack)])
    return 0


# ---------------------------------------------------------------- simulate

def cmd_simulate(args, out) -> int:
    eps = resolve_epsilon(args.epsilon)
    net = _load(args.network)
    try:
        arrivals = load_arrivals(args.arrivals, net)
    except OSError as exc:
        raise NetworkError(f"cannot read {args.arrivals}: {exc.strerror}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise NetworkError(f"bad arrival file {args.arrivals}: {exc}") from None
    res = competitive_ratio_estimate(net, arrivals, args.bits, args.delta, energy=args.energy,
                                     epsilon=eps, horizon=args.horizon)
    lz = res.lazy
    slack = 0.0
    if lz.t_min > 0:
        oracle = RateOracle(net, eps)
        sol = oracle.solve(lz.energy, lz.t_min)
        if sol is not None:
            slack = feasibility_slack(oracle.network(lz.energy, lz.t_min), sol)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t_min", fmt(lz.t_min)])
    w.writerow(["completion", fmt(lz.completion)])
    w.writerow(["T_lb", fmt(res.lower_bound)])
    w.writerow(["ratio", fmt(res.ratio)])
    w.writerow(["bound", fmt(res.bound) if res.lower_bound > 0 else "NaN"])
    w.writerow(["rate", fmt(lz.rate)])
    w.writerow(["slack", fmt(slack)])
    w.writerow([])
    w.writerow(["counter", "check"])
    for c, val in lz.history:
        w.writerow([fmt(c), fmt(val)])
    return 0


# ---------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ehmaxflow", description="Max-flow and online scheduling on energy-harvesting networks.")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("maxflow", help="solve one network")
    m.add_argument("network")
    m.add_argument("--epsilon", type=float)
    m.add_argument("--mac", action="store_true", help="multiple-access receivers")
    m.add_argument("--method", choices=("flowmax", "direct"), default="flowmax")
    m.add_argument("--csv", help="also write the edge allocation to this file")
    m.set_defaults(func=cmd_maxflow)

    s = sub.add_parser("sweep", help="Cartesian sweep over node budgets")
    s.add_argument("network")
    s.add_argument("--param", action="append", metavar="NODE:A:B:N[:log] | NODE:V1,V2,...")
    s.add_argument("--epsilon", type=float)
    s.add_argument("--mac", action="store_true")
    s.add_argument("--method", choices=("flowmax", "direct"), default="flowmax")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("simulate", help="run the lazy online scheduler")
    o.add_argument("network")
    o.add_argument("arrivals")
    o.add_argument("--bits", type=float, required=True)
    o.add_argument("--delta", type=float, default=1e-4)
    o.add_argument("--energy", choices=("counter", "current"), default="counter")
    o.add_argument("--horizon", type=float)
    o.add_argument("--epsilon", type=float)
    o.set_defaults(func=cmd_simulate)
    return p


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except NonConvergence as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except HorizonExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HORIZON
    except ValueError as exc:
        # parse, validation and usage errors (NetworkError and UsageError are ValueErrors)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
