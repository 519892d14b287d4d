"""Regenerate src/ardiag/data/tw1_grid.csv (takes a few minutes)."""
import argparse
from pathlib import Path

import numpy as np

from ardiag.tracy_widom import GRID_HI, GRID_LO, GRID_POINTS, fredholm_log_cdf_sf

OUT = Path(__file__).resolve().parents[1] / "src" / "ardiag" / "data" / "tw1_grid.csv"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=200)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()

    s = np.linspace(GRID_LO, GRID_HI, GRID_POINTS)
    rows = [fredholm_log_cdf_sf(v, args.nodes) for v in s]
    with open(args.out, "w") as fh:
        fh.write("s,log_cdf,log_sf\n")
        for v, (lc, ls) in zip(s, rows):
            fh.write(f"{v:.4f},{lc!r},{ls!r}\n")
    print(f"wrote {len(s)} points to {args.out}")


if __name__ == "__main__":
    main()
