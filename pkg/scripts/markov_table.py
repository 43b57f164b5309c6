"""Equilibrium vectors and legitimate mass of the binary 3-ring for a set of p values."""
import argparse
import csv
import sys

from stabring.markov import build_transition_matrix, equilibrium, legitimate_mass, render_fraction


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("p", nargs="*", default=["1", "3/4", "1/2", "1/4", "1/10"])
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    header = None
    for p in args.p:
        mat = build_transition_matrix(3, p)
        vec = equilibrium(mat)
        if header is None:
            header = ["p"] + [mat.label(s) for s in mat.states] + ["mass"]
            w.writerow(header)
        show = render_fraction if vec.exact else float
        w.writerow([render_fraction(mat.p)] + [show(v) for v in vec.probs] + [show(legitimate_mass(vec, mat))])


if __name__ == "__main__":
    main()
