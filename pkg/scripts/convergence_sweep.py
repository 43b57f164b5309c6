"""Convergence statistics from random initial configurations, one CSV row per (protocol, n)."""
import argparse
import csv
import statistics
import sys

from stabring.analysis import convergence_trials
from stabring.protocols import make_protocol

KINDS = ("regular-bot", "safe-unary", "safe-gray", "composite-safe")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--protocols", nargs="+", default=list(KINDS))
    ap.add_argument("--n", type=int, nargs="+", default=[3, 4, 5])
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--budget", type=int, default=10**6)
    ap.add_argument("--window", type=int, default=10**4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["protocol", "n", "trials", "converged", "closure_ok", "median_steps", "max_steps"])
    for kind in args.protocols:
        for n in args.n:
            rs = convergence_trials(make_protocol(kind, n), args.trials, args.budget, args.seed,
                                    args.window, jobs=args.jobs)
            steps = [r.steps for r in rs if r.converged]
            w.writerow([kind, n, len(rs), len(steps), sum(r.closure_ok for r in rs),
                        statistics.median(steps) if steps else "", max(steps, default="")])
            sys.stdout.flush()


if __name__ == "__main__":
    main()
