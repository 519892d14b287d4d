"""Type-I error table for the largest-eigenvalue test under null data."""
import argparse
import time

from ardiag.calibration import CalibrationGrid, run_calibration


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[100, 500])
    ap.add_argument("--K", type=int, nargs="+", default=[10, 20])
    ap.add_argument("--replicates", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", help="also write the table as CSV")
    args = ap.parse_args()

    t0 = time.perf_counter()
    grid = CalibrationGrid(n_values=tuple(args.n), K_values=tuple(args.K),
                           replicates=args.replicates, base_seed=args.seed)
    table = run_calibration(grid, workers=args.workers)
    print(table.to_markdown())
    print(f"{time.perf_counter() - t0:.0f}s")
    if args.csv:
        table.to_csv(args.csv)


if __name__ == "__main__":
    main()
