"""Independent reference computations used only by the tests."""
from fractions import Fraction
from itertools import combinations, permutations

import sympy


def cofactor_det(a):
    n = len(a)
    if n == 1:
        return a[0][0]
    total = 0
    for j in range(n):
        if a[0][j]:
            minor = [row[:j] + row[j + 1:] for row in a[1:]]
            total += (-1) ** j * a[0][j] * cofactor_det(minor)
    return total


def leibniz_det(a):
    n = len(a)
    total = 0
    for p in permutations(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if p[i] > p[j])
        term = 1
        for i in range(n):
            term *= a[i][p[i]]
        total += -term if inv % 2 else term
    return total


def charpoly_by_interpolation(a):
    """det(xI - A) from n+1 exact cofactor determinants, ascending coefficients."""
    n = len(a)
    xs = list(range(n + 1))
    ys = [cofactor_det([[(x if i == j else 0) - a[i][j] for j in range(n)] for i in range(n)]) for x in xs]
    # Lagrange interpolation over Q
    coeffs = [Fraction(0)] * (n + 1)
    for i, xi in enumerate(xs):
        basis = [Fraction(1)]
        denom = Fraction(1)
        for j, xj in enumerate(xs):
            if j == i:
                continue
            basis = [Fraction(0)] + basis
            for k in range(len(basis) - 1):
                basis[k] -= xj * basis[k + 1]
            denom *= xi - xj
        for k in range(n + 1):
            coeffs[k] += ys[i] * basis[k] / denom
    assert all(c.denominator == 1 for c in coeffs)
    return [int(c) for c in coeffs]


def unimodular(n, ops):
    """P and P^-1 from elementary row additions (i, j, c): row_i += c row_j."""
    P = [[int(i == j) for j in range(n)] for i in range(n)]
    Q = [[int(i == j) for j in range(n)] for i in range(n)]
    for i, j, c in ops:
        if i == j or c == 0:
            continue
        P[i] = [a + c * b for a, b in zip(P[i], P[j])]
        # inverse applies the opposite column operation on the right
        for r in range(n):
            Q[r][j] -= c * Q[r][i]
    return P, Q


def brute_facets(rays):
    """Facet normals of a full-dimensional pointed cone by trying every (n-1)-subset."""
    n = len(rays[0])
    found = set()
    for sub in combinations(rays, n - 1):
        M = sympy.Matrix(sub)
        if M.rank() != n - 1:
            continue
        ns = M.nullspace()
        v = ns[0]
        lcm = sympy.ilcm(*[x.q for x in v])
        v = [int(x * lcm) for x in v]
        g = 0
        for x in v:
            g = sympy.igcd(g, x)
        v = [x // g for x in v]
        vals = [sum(a * b for a, b in zip(v, r)) for r in rays]
        if all(x >= 0 for x in vals):
            found.add(tuple(v))
        elif all(x <= 0 for x in vals):
            found.add(tuple(-x for x in v))
    return found
