"""Error of the binomial-corrected recursion on planted Jordan blocks.

Sweeps eigenvalue, block size, noise level and depth; prints the worst
recovery error and the worst transformation-law residual per cell.
"""
import argparse
import csv
import random
import sys

from arithdyn.heights import PlantedJordanBlock, jordan_heights

ap = argparse.ArgumentParser()
ap.add_argument("--lams", type=int, nargs="+", default=[2, 3])
ap.add_argument("--sizes", type=int, nargs="+", default=[1, 2, 3, 4])
ap.add_argument("--noise", type=float, nargs="+", default=[0.0, 0.01, 0.1, 1.0])
ap.add_argument("--depths", type=int, nargs="+", default=[20, 40, 60])
ap.add_argument("--trials", type=int, default=10)
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

rng = random.Random(args.seed)
w = csv.writer(sys.stdout, lineterminator="\n")
w.writerow(["lam", "m", "noise", "n", "max_value_err", "max_law_residual"])
for lam in args.lams:
    for m in args.sizes:
        for eps in args.noise:
            for n in args.depths:
                err = law = 0.0
                for _ in range(args.trials):
                    planted = [rng.uniform(-5, 5) for _ in range(m)]
                    gen = PlantedJordanBlock(lam, planted, noise=eps, seed=rng.getrandbits(32))
                    out = jordan_heights(lam, m, gen, n_max=n + 1, tol=float("inf"))
                    err = max(err, max(abs(float(out[k].value) - planted[k]) for k in range(m)))
                    law = max(law, max(float(x) for x in out.law_residuals))
                w.writerow([lam, m, eps, n, f"{err:.3e}", f"{law:.3e}"])
