"""Re-run the operator search starting from the published A_{4,3} parameters.

Prints the lower-bound objective at the published point and the best value found,
for each requested Eb/N0.
Usage: python scripts/reoptimize_a43.py [--ebn0 16] [--restarts 20] [--max-iters 30]
"""
import argparse

import numpy as np

from lpcb.codebook import OperatorParams, load_fixture
from lpcb.optimizer import OptimizationProblem, evaluate, optimize


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ebn0", type=float, nargs="+", default=[16.0])
    ap.add_argument("--kappa", type=float, default=20.0)
    ap.add_argument("--restarts", type=int, default=20)
    ap.add_argument("--max-iters", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    m = load_fixture("A4_3_150").meta
    published = OperatorParams(m["E"], m["theta"], m["rho"], m["phi"])
    perms = tuple(np.array(p) for p in m["perms"])
    for eb in args.ebn0:
        prob = OptimizationProblem(M=4, T=3, kappa=args.kappa, ebn0_db=eb, perms=perms,
                                   restarts=args.restarts, max_iters=args.max_iters,
                                   seed=args.seed, x0=published)
        base = evaluate(published, prob)
        res = optimize(prob)
        print(f"{eb:5.1f} dB  published {base:.4f}  best {res.value:.4f}  ratio {res.value / base:.3f}  "
              f"restart {res.restart}  evals {res.evaluations}  {res.wall_time:.0f}s", flush=True)
        print("   params", res.to_dict()["params"], flush=True)


if __name__ == "__main__":
    main()
