"""Random sweep of the cone criteria.

For conjugates P N P^-1 acting on the simplicial cone spanned by the columns
of a unimodular P, tabulate the dilation verdict, the ray-count verdict and
whether the two ever disagree with an eigen-decomposition.
"""
import argparse
import random
from collections import Counter

import numpy as np

from arithdyn.cones import DilationVerdict, canonicalize, dilation_criterion, ray_count_criterion
from arithdyn.errors import ContradictionDetected, PreconditionViolated
from arithdyn.exactlin import IntMatrix


def unimodular(n, rng, steps=4):
    P = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(steps):
        i, j = rng.sample(range(n), 2)
        c = rng.randint(-2, 2)
        for r in range(n):
            P[r][i] += c * P[r][j]
    return P


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("-n", "--instances", type=int, default=500)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    tally = Counter()
    for _ in range(args.instances):
        n = rng.choice([2, 3])
        P = IntMatrix(tuple(map(tuple, unimodular(n, rng))))
        if rng.random() < 0.3:
            N = IntMatrix.scalar(n, rng.randint(1, 5))
        else:
            N = IntMatrix(tuple(tuple(rng.randint(0, 3) for _ in range(n)) for _ in range(n)))
        # P^-1 via the adjugate is overkill here; numpy inverse of a unimodular matrix rounds exactly
        Pinv = IntMatrix(tuple(tuple(int(round(x)) for x in row) for row in np.linalg.inv(np.array(P.rows, float))))
        M = P @ N @ Pinv
        if M.det() == 0:
            tally["singular"] += 1
            continue
        C = canonicalize([tuple(P.rows[i][j] for i in range(n)) for j in range(n)])
        d = dilation_criterion(M, C).verdict
        try:
            rc = ray_count_criterion(M, C).verdict.value
        except PreconditionViolated:
            rc = "not-applicable"
        except ContradictionDetected:
            rc = "CONTRADICTION"
        w, V = np.linalg.eig(np.array(M.rows, float))
        # equal eigenvalues only count when M is also diagonalizable
        scalar = bool(np.ptp(w.real) < 1e-9 and np.all(abs(w.imag) < 1e-9) and abs(np.linalg.det(V)) > 1e-8)
        tally[(d.value, rc, "scalar" if scalar else "non-scalar")] += 1
        if d is not DilationVerdict.INCONCLUSIVE and (d is DilationVerdict.DILATION) != (scalar and w.real[0] > 0):
            tally["DISAGREE"] += 1
    for k, v in sorted(tally.items(), key=lambda kv: str(kv[0])):
        print(f"{v:6d}  {k}")


if __name__ == "__main__":
    main()
