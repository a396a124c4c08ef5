"""Closed-form estimator and rate terms against Monte-Carlo moments, term by term.

    python scripts/verify_moments.py --trials 100000
"""

import argparse

from cfleo import validation as v


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print("estimator moments (worst relative error per family)")
    for name, err in v.estimator_errors(args.trials, args.seed).items():
        print(f"  {name:16s} {err:.4f}")
    rep = v.rate_term_report(args.trials, args.seed + 1)
    print(f"\nrate trace terms ({len(rep.terms)})")
    print(f"  {'term':28s} {'closed':>12s} {'empirical':>12s} {'rel.err':>8s}")
    for t in rep.terms:
        print(f"  {t.name:28s} {t.closed:12.5g} {t.empirical:12.5g} {t.rel_error:8.4f}")
    print(f"\nworst: {rep.worst().name} at {rep.worst().rel_error:.4f}")


if __name__ == "__main__":
    main()
