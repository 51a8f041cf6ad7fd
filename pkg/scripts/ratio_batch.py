"""Lazy online policy against the offline lower bound on random networks and arrival streams."""
import argparse

import numpy as np

from ehmaxflow.experiments import ratio_batch


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--nets", type=int, default=20)
    ap.add_argument("--per-net", type=int, default=10)
    ap.add_argument("--delta", type=float, default=1e-3)
    ap.add_argument("--energy", choices=("counter", "current"), default="counter")
    args = ap.parse_args()
    b = ratio_batch(args.seed, args.nets, args.per_net, delta=args.delta, energy=args.energy)
    r = np.array([x.ratio for x in b.runs])
    print(f"runs {len(r)}  above bound {len(b.violations)}  max ratio {r.max():.4f}  "
          f"median {np.median(r):.4f}  adversarial max {b.max_adversarial:.4f}  {b.seconds:.1f} s")
    for x in sorted(b.violations, key=lambda x: -x.ratio)[:10]:
        print(f"  ratio {x.ratio:.4f}  T_lb {x.T_lb:.4g}  completion {x.completion:.4g}")


if __name__ == "__main__":
    main()
