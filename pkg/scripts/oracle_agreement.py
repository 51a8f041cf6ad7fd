"""Multilayer driver against the direct convex solve and, on tiny networks, the power grid."""
import argparse

from ehmaxflow.experiments import grid_agreement, oracle_agreement


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-n", type=int, default=50)
    ap.add_argument("--tiny", type=int, default=20)
    args = ap.parse_args()
    runs = oracle_agreement(args.seed, args.n)
    worst = max(runs, key=lambda a: a.rel_error)
    methods = {m: sum(a.method == m for a in runs) for m in {a.method for a in runs}}
    print(f"direct: {len(runs)} nets, max relative error {worst.rel_error:.2e}, methods {methods}")
    tiny = grid_agreement(args.seed, args.tiny)
    gap = max(max(abs(a.flowmax - a.grid), abs(a.reference - a.grid)) for a in tiny)
    print(f"grid: {len(tiny)} tiny nets, max gap to grid {gap:.2e}")


if __name__ == "__main__":
    main()
