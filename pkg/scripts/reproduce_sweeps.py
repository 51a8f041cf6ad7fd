"""Relay and multiple-access sweeps against the bundled reference coordinates; writes CSV."""
import argparse
import csv
import sys

from ehmaxflow.experiments import mac_sweep, relay_sweep


def write(report, names, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(names + ["reference", "maxflow", "error", "iterations"])
    for p in report.points:
        w.writerow([f"{v:g}" for v in p.params] + [f"{p.expected:.6g}", f"{p.got:.6g}", f"{p.error:.2e}", p.iterations])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--which", choices=("relay", "mac"), default="relay")
    ap.add_argument("--out", help="CSV path (default stdout)")
    ap.add_argument("--tol", type=float, default=5e-3)
    args = ap.parse_args()
    if args.which == "relay":
        rep, names = relay_sweep(), ["P_s", "P_5"]
    else:
        rep, names = mac_sweep(), ["P_2", "P_3", "P_5"]
    with (open(args.out, "w", newline="") if args.out else sys.stdout) as fh:
        write(rep, names, fh)
    print(f"{len(rep.within(args.tol))}/{len(rep.points)} within {args.tol} in {rep.seconds:.2f} s", file=sys.stderr)


if __name__ == "__main__":
    main()
