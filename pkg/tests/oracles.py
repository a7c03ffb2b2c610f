"""Independent reference computations used by the tests.

Nothing here imports the solver paths under test: resistances come from dense
pseudo-inverses, walk statistics from dense absorbing-chain algebra, cuts from
enumeration and flows from linear programming.
"""
import itertools
import math
from functools import lru_cache

import mpmath
import numpy as np
from scipy.optimize import linprog

# E[phi_{0,4}(x) phi_{0,4}(y)] at |x - y| = 1/2: quad of e^{-s}/(2s) over [1/8, 32],
# evaluated once with mpmath at 40 digits and frozen here.
COV_0_4_HALF = 0.8117128202920842036800634010588628637548


def covariance_quad(r, m, n, dps=30):
    """``int_{r^2 4^m / 2}^{r^2 4^n / 2} e^{-s} / (2 s) ds`` by mpmath quadrature."""
    if r == 0:
        return (n - m) * math.log(2)
    with mpmath.workdps(dps):
        lo = mpmath.mpf(r) ** 2 * mpmath.mpf(4) ** m / 2
        hi = mpmath.mpf(r) ** 2 * mpmath.mpf(4) ** n / 2
        return float(mpmath.quad(lambda s: mpmath.exp(-s) / (2 * s), [lo, hi]))


def dense_laplacian(n_vertices, edges, conductance):
    L = np.zeros((n_vertices, n_vertices))
    for (u, v), c in zip(edges, conductance):
        L[u, u] += c
        L[v, v] += c
        L[u, v] -= c
        L[v, u] -= c
    return L


def dense_resistance(n_vertices, edges, conductance, A, Z):
    """Resistance between vertex sets by merging each set and using a pseudo-inverse."""
    label = np.arange(n_vertices)
    A, Z = list(A), list(Z)
    label[A] = A[0]
    label[Z] = Z[0]
    uniq = {v: i for i, v in enumerate(sorted(set(label.tolist())))}
    m = len(uniq)
    L = np.zeros((m, m))
    for (u, v), c in zip(edges, conductance):
        a, b = uniq[label[u]], uniq[label[v]]
        if a == b:
            continue
        L[a, a] += c
        L[b, b] += c
        L[a, b] -= c
        L[b, a] -= c
    e = np.zeros(m)
    e[uniq[A[0]]] = 1
    e[uniq[Z[0]]] = -1
    return float(e @ np.linalg.pinv(L) @ e)


def three_node_resistance(c_ij, c_ik, c_jk):
    """Series-parallel formula ``1 / (c_ij + (1/c_ik + 1/c_jk)^-1)``."""
    return 1.0 / (c_ij + 1.0 / (1.0 / c_ik + 1.0 / c_jk))


def brute_min_cut(n_vertices, edges, cap, A, Z):
    free = [v for v in range(n_vertices) if v not in set(A) | set(Z)]
    edges = np.asarray(edges)
    cap = np.asarray(cap, float)
    best = math.inf
    for bits in itertools.product([False, True], repeat=len(free)):
        side = np.zeros(n_vertices, bool)
        side[list(A)] = True
        side[free] = bits
        best = min(best, float(cap[side[edges[:, 0]] != side[edges[:, 1]]].sum()))
    return best


def lp_max_flow(n_vertices, edges, cap, A, Z):
    """Max flow by linear programming on signed edge flows."""
    E = len(edges)
    A, Z = set(A), set(Z)
    # variables: edge flows f_e in [-cap, cap], then strength s
    c = np.zeros(E + 1)
    c[-1] = -1.0
    rows, rhs = [], []
    for v in range(n_vertices):
        if v in A or v in Z:
            continue
        row = np.zeros(E + 1)
        for e, (a, b) in enumerate(edges):
            if a == v:
                row[e] -= 1
            if b == v:
                row[e] += 1
        rows.append(row)
        rhs.append(0.0)
    out = np.zeros(E + 1)
    for e, (a, b) in enumerate(edges):
        if a in A and b not in A:
            out[e] += 1
        if b in A and a not in A:
            out[e] -= 1
    out[-1] = -1
    rows.append(out)
    rhs.append(0.0)
    bounds = [(-float(x), float(x)) for x in cap] + [(0, None)]
    res = linprog(c, A_eq=np.array(rows), b_eq=np.array(rhs), bounds=bounds, method="highs")
    return -res.fun


def transition_matrix(n_vertices, edges, conductance):
    W = np.zeros((n_vertices, n_vertices))
    for (u, v), c in zip(edges, conductance):
        W[u, v] += c
        W[v, u] += c
    return W / W.sum(axis=1, keepdims=True)


def absorbing_green(P, domain):
    """``(I - P_DD)^{-1}``: expected visits before leaving ``domain``."""
    d = np.asarray(domain)
    return np.linalg.inv(np.eye(d.size) - P[np.ix_(d, d)])


def absorbing_hitting(P, v, A, Z):
    """``P^v(tau_A < tau_Z)`` from the harmonic system with boundary data 1 on A, 0 on Z."""
    n = P.shape[0]
    fixed = set(A) | set(Z)
    free = [x for x in range(n) if x not in fixed]
    M = np.eye(len(free)) - P[np.ix_(free, free)]
    b = P[np.ix_(free, list(A))].sum(axis=1)
    h = np.linalg.solve(M, b)
    return float(h[free.index(v)])


def frechet_recursive(p, q):
    """Textbook memoized discrete Fréchet distance."""
    p = [tuple(x) for x in p]
    q = [tuple(x) for x in q]

    @lru_cache(maxsize=None)
    def c(i, j):
        d = math.dist(p[i], q[j])
        if i == 0 and j == 0:
            return d
        if i == 0:
            return max(c(0, j - 1), d)
        if j == 0:
            return max(c(i - 1, 0), d)
        return max(min(c(i - 1, j), c(i - 1, j - 1), c(i, j - 1)), d)

    return c(len(p) - 1, len(q) - 1)


def sorted_quantile(x, p):
    """``inf{x : F(x) >= p}`` straight from the sorted sample."""
    s = sorted(x)
    return s[max(0, math.ceil(p * len(s) - 1e-12) - 1)]
