"""Distance metrics of the bundled codebooks (MED, MPD, minimum distance and its lower bound).

Usage: python scripts/table_med.py [--ebn0 16] [--kappa 20]
"""
import argparse
import time

from lpcb.codebook import FIXTURES, load_fixture
from lpcb.metrics import metric_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ebn0", type=float, default=16.0)
    ap.add_argument("--kappa", type=float, default=20.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'codebook':<10} {'MED':>7} {'method':>10} {'MPD':>9} {'dmin':>8} {'dLB':>8} {'mode':>11} {'sec':>6}")
    for name in FIXTURES:
        t = time.perf_counter()
        r = metric_report(load_fixture(name), args.kappa, args.ebn0, seed=args.seed)
        print(f"{name:<10} {r['med']:7.4f} {r['med_method']:>10} {r['mpd']:9.4f} {r['delta_min']:8.4f} "
              f"{r['delta_lb']:8.4f} {r['mode']:>11} {time.perf_counter() - t:6.1f}")


if __name__ == "__main__":
    main()
