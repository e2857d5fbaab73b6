"""Largest contactizing epsilon and the s = 1 margin for local branched covers of order k.

    python3 scripts/epsilon_vs_k.py [--kmax 8] [--csv eps_vs_k.csv]
"""

import argparse
import csv
import sys

from contactlab.cover import (
    binding_margin_audit, deck_invariance_check, epsilon_search, local_model, local_model_alpha, pullback_branched,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kmax", type=int, default=8)
    ap.add_argument("--delta", type=float, default=1.0)
    ap.add_argument("--csv", help="write the table here instead of stdout")
    args = ap.parse_args()
    rows = []
    for k in range(2, args.kmax + 1):
        c = local_model(k, args.delta)
        ahat, _ = pullback_branched(c, local_model_alpha(c.target))
        es = epsilon_search(ahat, c)
        audit = binding_margin_audit(ahat, c, es.eps)
        deck = deck_invariance_check(es.alpha, c)
        rows.append([k, es.eps, es.reports["s=1.0"].min_margin, audit["linearity_error"], deck["max_residual"]])
    fh = open(args.csv, "w", newline="") if args.csv else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["k", "eps", "min_margin_s1", "binding_linearity_error", "deck_residual"])
    w.writerows(rows)
    if args.csv:
        fh.close()


if __name__ == "__main__":
    main()
