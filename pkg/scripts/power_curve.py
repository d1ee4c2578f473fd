"""Power of the supremum and standard latent-process tests along sqrt(tau) = i * sqrt(tau0).

    python scripts/power_curve.py --reps 10000 --csv power.csv
"""

import argparse

from binlat.cli import format_table, write_rows
from binlat.simulation import PowerConfig, run_power_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--csv")
    args = ap.parse_args()

    header = ["m", "factor", "power_sup", "power_standard", "se_sup", "se_standard"]
    rows = []
    for m in (1, 2):
        rep = run_power_curve(PowerConfig(m=m, n=args.n, reps=args.reps, seed=args.seed, workers=args.workers))
        rows += [(m, *(c[h] for h in header[1:])) for c in rep.cells]
        print(f"m={m}: critical values sup {rep.config['critical_sup']:.3f}, "
              f"standard {rep.config['critical_standard']:.3f} ({rep.wall_time:.0f}s)")
    print(format_table(header, rows))
    if args.csv:
        write_rows(args.csv, header, rows)


if __name__ == "__main__":
    main()
