"""GA against exhaustive grid search on the two-SAP, two-UT reference instance.

    python scripts/ga_oracle.py --seeds 10 --levels 8
"""

import argparse

from cfleo import validation as v
from cfleo.allocation import GaParams


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--levels", type=int, default=v.ORACLE_GRID)
    ap.add_argument("--generations", type=int, default=150)
    args = ap.parse_args()
    res = v.ga_vs_grid(range(args.seeds), GaParams(generations=args.generations), args.levels)
    print(f"grid optimum ({args.levels} levels): {res[0].grid_objective:.6f}")
    for r in res:
        print(f"  seed {r.seed}: GA {r.ga_objective:.6f}  ratio {r.ratio:.5f}")


if __name__ == "__main__":
    main()
