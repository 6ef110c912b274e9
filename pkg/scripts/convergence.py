"""BER after each detector iteration for the bundled codebooks (AWGN by default).

Usage: python scripts/convergence.py [--ebn0 8 10 12] [--frames 100000] [--iters 10]
"""
import argparse
import math

from lpcb.codebook import FIXTURES, load_fixture
from lpcb.simulator import ber_by_iteration


def first_within(bers, rel):
    ref = bers[-1]
    for i, b in enumerate(bers, 1):
        if abs(b - ref) <= rel * ref:
            return i
    return len(bers)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ebn0", type=float, nargs="+", default=[8.0, 10.0, 12.0])
    ap.add_argument("--kappa", type=float, default=math.inf)
    ap.add_argument("--frames", type=int, default=100_000)
    ap.add_argument("--iters", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--codebooks", nargs="+", default=list(FIXTURES))
    args = ap.parse_args()
    for name in args.codebooks:
        cbs = load_fixture(name)
        for eb in args.ebn0:
            b = ber_by_iteration(cbs, eb, args.kappa, args.frames, args.iters, args.seed,
                                 threads=args.threads)
            cells = " ".join(f"{v:.3e}" for v in b)
            print(f"{name} {eb:5.1f} dB  within5%@{first_within(b, 0.05)}  {cells}", flush=True)


if __name__ == "__main__":
    main()
