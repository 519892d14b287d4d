"""Rejection rate of the correlation test on correlated scenarios."""
import argparse
import time

from ardiag.calibration import POWER_PRESETS, run_power


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--presets", nargs="+", default=list(POWER_PRESETS))
    ap.add_argument("--replicates", type=int, default=100)
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--K", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    for name in args.presets:
        t0 = time.perf_counter()
        r = run_power(name, args.replicates, base_seed=args.seed, n=args.n, K=args.K,
                      workers=args.workers)
        print(f"{name}: {r.rejections}/{r.replicates} rejected "
              f"({r.nonconverged} non-converged), {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
