"""Two-terminal solves and the electrical-network algebra built on them."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .maxflow import max_flow_min_cut
from .network import AroundView, Network, NetworkError, Terminals, contract

__all__ = [
    "SolveResult",
    "WeightedPathSet",
    "ConnectivityError",
    "SolverError",
    "DecompositionError",
    "solve_two_terminal",
    "effective_resistance",
    "dirichlet_energy",
    "path_decomposition",
    "max_flow_min_cut",
    "current_through_set",
    "around_resistance",
    "resdif_gap",
    "ResdifGap",
    "green_function",
    "hitting_probability",
]

DIRECT_BELOW = 5000
MAX_ITER = 50_000
DEFAULT_TOL = 1e-10


class ConnectivityError(NetworkError):
    """The terminals are not joined by any path."""


class SolverError(RuntimeError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class DecompositionError(RuntimeError):
    """Residual flow could not be stripped into source-to-sink paths."""


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Outcome of a two-terminal solve.

    ``potential`` is the voltage with ``f(A) = 1`` and ``f(Z) = 0`` (NaN on
    components touching neither terminal).  ``current`` is the unit-strength
    current from ``A`` to ``Z``, oriented along ``net.edges``.  The potential
    driving that unit current is ``unit_potential = R * potential``; Ohm's law
    ``f(x) - f(y) = theta(x, y) r(x, y)`` holds for the pair
    ``(unit_potential, current)``.
    """

    potential: np.ndarray
    current: np.ndarray
    resistance: float
    conductance: float
    energy: float
    residual: float
    iterations: int
    fallback: bool
    terminals: Terminals

    @property
    def unit_potential(self) -> np.ndarray:
        return self.potential * self.resistance

    def diagnostics(self) -> dict:
        return {"iterations": self.iterations, "residual": self.residual, "fallback": self.fallback}


def _solve_spd(L, b, tol, method="auto"):
    """Solve an SPD system; returns (x, relative residual, iterations, used_direct)."""
    n = L.shape[0]
    if n == 0:
        return np.zeros(0), 0.0, 0, True
    bnorm = float(np.linalg.norm(b)) or 1.0
    if method == "direct" or (method == "auto" and n < DIRECT_BELOW):
        x = spla.spsolve(L.tocsc(), b)
        x = np.atleast_1d(x)
        res = float(np.linalg.norm(L @ x - b)) / bnorm
        return x, res, 0, True
    d = L.diagonal()
    M = sp.diags(1.0 / d)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.cg(L, b, rtol=tol, atol=0.0, maxiter=MAX_ITER, M=M, callback=cb)
    res = float(np.linalg.norm(L @ x - b)) / bnorm
    if info != 0:
        raise SolverError(f"conjugate gradient did not converge in {count[0]} iterations", res)
    return x, res, count[0], False


def solve_two_terminal(net: Network, t: Terminals | None = None, tol: float = DEFAULT_TOL,
                       method: str = "auto") -> SolveResult:
    """Voltage and unit current between terminal sets ``A`` and ``Z``.

    Each terminal set acts as one supernode: its vertices are eliminated from
    the Laplacian and enter as Dirichlet data.  Systems below 5000 unknowns are
    factorized; larger ones use Jacobi-preconditioned conjugate gradient.

    Parameters
    ----------
    net : Network
    t : Terminals, optional
        Defaults to the two terminal groups carried by ``net``.
    tol : float
        Relative residual target for the iterative path, in ``(0, 1e-6]``.
    method : {"auto", "direct", "cg"}

    Raises
    ------
    ConnectivityError
        No component of the graph meets both ``A`` and ``Z``.
    SolverError
        Conjugate gradient failed to converge.
    """
    if not (0 < tol <= 1e-6):
        raise ValueError("tol must lie in (0, 1e-6]")
    t = Terminals.of(net) if t is None else t
    t.check(net)
    n = net.n_vertices
    c = net.conductance
    u, v = net.edges[:, 0], net.edges[:, 1]

    adj = sp.coo_matrix((np.ones(net.n_edges), (u, v)), shape=(n, n))
    _, comp = connected_components(adj, directed=False)
    has_a = np.zeros(comp.max() + 1, dtype=bool)
    has_z = np.zeros_like(has_a)
    has_a[comp[t.A]] = True
    has_z[comp[t.Z]] = True
    if not np.any(has_a & has_z):
        raise ConnectivityError("terminals are disconnected")

    boundary = np.zeros(n, dtype=bool)
    boundary[t.A] = True
    boundary[t.Z] = True
    active = (has_a | has_z)[comp] & ~boundary
    idx = np.nonzero(active)[0]
    f = np.full(n, np.nan)
    f[t.A] = 1.0
    f[t.Z] = 0.0

    L = net.laplacian()
    L_ii = L[idx][:, idx]
    rhs = -(L[idx][:, t.A] @ np.ones(t.A.size))
    x, res, iters, direct = _solve_spd(L_ii, np.asarray(rhs).ravel(), tol, method)
    f[idx] = x

    fu = np.nan_to_num(f[u], nan=0.0)
    fv = np.nan_to_num(f[v], nan=0.0)
    theta = c * (fu - fv)
    inA = boundary.copy()
    inA[:] = False
    inA[t.A] = True
    out = np.sum(theta[inA[u] & ~inA[v]]) - np.sum(theta[inA[v] & ~inA[u]])
    if not out > 0:
        raise ConnectivityError("no current flows between the terminals")
    R = 1.0 / out
    theta = theta * R
    energy = float(np.sum(theta * theta * net.resistance))
    return SolveResult(f, theta, R, out, energy, res, iters, direct, t)


def effective_resistance(net: Network, A, Z, tol: float = DEFAULT_TOL) -> float:
    """``R(A, Z)`` with each set acting as a supernode."""
    return solve_two_terminal(net, Terminals(A, Z), tol).resistance


def _edge_mask(net: Network, subset) -> np.ndarray:
    if subset is None:
        return np.ones(net.n_edges, dtype=bool)
    mask = np.zeros(net.n_edges, dtype=bool)
    sub = np.asarray(subset)
    if sub.dtype == bool:
        return sub.copy()
    mask[sub.astype(np.int64)] = True
    return mask


def dirichlet_energy(net: Network, current, subset=None) -> float:
    """``sum_{e in subset} theta(e)^2 r_e`` (all edges when ``subset`` is None)."""
    theta = np.asarray(current, dtype=float)
    m = _edge_mask(net, subset)
    return float(np.sum(theta[m] ** 2 * net.resistance[m]))


@dataclass(frozen=True, eq=False)
class WeightedPathSet:
    """Source-to-sink paths with weights and per-incidence split resistances.

    ``edge_paths[k]`` lists the edge ids of ``paths[k]`` and
    ``split_resistances[k]`` the matching ``r_{e, P_k}``.
    """

    paths: list
    edge_paths: list
    weights: np.ndarray
    split_resistances: list

    def edge_load(self, n_edges: int) -> np.ndarray:
        """``sum_{k: e in P_k} alpha_k`` per edge."""
        load = np.zeros(n_edges)
        for w, ep in zip(self.weights, self.edge_paths):
            np.add.at(load, ep, w)
        return load

    def energy(self) -> float:
        return float(sum(w * w * np.sum(rs) for w, rs in zip(self.weights, self.split_resistances)))


def path_decomposition(net: Network, result: SolveResult, tol: float = 1e-9) -> WeightedPathSet:
    """Strip a unit current into weighted source-to-sink paths.

    From the source vertex with the largest outgoing flow, repeatedly follow the
    largest residual outgoing flow (smallest vertex index on ties) until the
    sink; the path weight is its bottleneck.  A walk that stalls prunes the
    stalled edge and restarts.  Weights are renormalized to sum to one and the
    split resistances use the reconstructed flow, ``r_{e,P} = r_e |theta_e| / alpha``.
    """
    theta = result.current
    A, Z = result.terminals.A, result.terminals.Z
    n = net.n_vertices
    u, v = net.edges[:, 0], net.edges[:, 1]
    src = np.where(theta >= 0, u, v)
    dst = np.where(theta >= 0, v, u)
    resid = np.abs(theta).astype(float)
    cutoff = 1e-14
    in_a = np.zeros(n, dtype=bool)
    in_a[A] = True
    in_z = np.zeros(n, dtype=bool)
    in_z[Z] = True
    # edges inside a terminal carry no flow
    resid[(in_a[src] & in_a[dst]) | (in_z[src] & in_z[dst])] = 0.0
    order = np.lexsort((dst, src))
    starts = np.searchsorted(src[order], np.arange(n + 1))
    out_edges = [order[starts[i]:starts[i + 1]] for i in range(n)]

    paths, edge_paths, alphas = [], [], []
    remaining = 1.0
    budget = 4 * net.n_edges + 16
    # strip well below tol so renormalizing the weights moves the load by < 1e-12
    while remaining > min(tol, 1e-12) and budget > 0:
        budget -= 1
        src_load = [(np.sum(resid[out_edges[a]][~in_a[dst[out_edges[a]]]]), -a) for a in A]
        best_load, neg_a = max(src_load)
        if best_load <= cutoff:
            break
        x = -neg_a
        verts, es = [x], []
        seen = {x}
        stalled = False
        while not in_z[x]:
            cand = out_edges[x]
            cand = cand[(resid[cand] > cutoff) & ~in_a[dst[cand]]]
            if cand.size == 0:
                if es:
                    resid[es[-1]] = 0.0
                stalled = True
                break
            r = resid[cand]
            top = cand[r == r.max()]
            e = top[np.argmin(dst[top])]
            y = int(dst[e])
            if y in seen:
                # numerical cycle: kill the closing edge and retry
                resid[e] = 0.0
                stalled = True
                break
            seen.add(y)
            es.append(int(e))
            verts.append(y)
            x = y
        if stalled:
            continue
        es_arr = np.asarray(es, dtype=np.int64)
        alpha = float(resid[es_arr].min())
        resid[es_arr] -= alpha
        resid[es_arr[resid[es_arr] <= cutoff]] = 0.0
        paths.append(verts)
        edge_paths.append(es_arr)
        alphas.append(alpha)
        remaining -= alpha
    if remaining > max(tol, 1e-6) or not alphas:
        raise DecompositionError(f"unstripped flow {remaining:.3e} remains")
    w = np.asarray(alphas)
    w = w / math.fsum(w)
    load = np.zeros(net.n_edges)
    for wk, ep in zip(w, edge_paths):
        np.add.at(load, ep, wk)
    r = net.resistance
    splits = [r[ep] * load[ep] / wk for wk, ep in zip(w, edge_paths)]
    return WeightedPathSet(paths, edge_paths, w, splits)


def _flow_capacity_net(net: Network, result: SolveResult, D):
    cap = np.abs(result.current)
    cap[_edge_mask(net, D)] = 0.0
    return cap


def current_through_set(net: Network, result: SolveResult, D) -> float:
    """``theta(D) = 1 - phi(D, theta)``: the part of the unit current that must cross ``D``.

    ``phi`` is the maximal flow from ``A`` to ``Z`` with capacities ``|theta(e)|``
    off ``D`` and zero on ``D``.  Clamped to ``[0, 1]``.
    """
    D = np.asarray(D if D is not None else [], dtype=np.int64) if not (
        isinstance(D, np.ndarray) and D.dtype == bool) else D
    if not _edge_mask(net, D).any():
        return 0.0
    cap = _flow_capacity_net(net, result, D)
    t = result.terminals
    flow = max_flow_min_cut(net.edges, cap, t.A, t.Z, net.n_vertices)
    return float(min(1.0, max(0.0, 1.0 - flow.value)))


def around_resistance(view: AroundView, tol: float = DEFAULT_TOL) -> float:
    """Resistance of the family of contours winding once around the hole.

    Equals ``1 / C`` with ``C = min_f sum_e c_e (df_e + J_e)^2``, where ``J`` is
    the unit cut cocycle carried by ``view``: the smallest energy of a
    potential that jumps by one each time it circles the hole.
    """
    net = view.network
    c = net.conductance
    J = np.zeros(net.n_edges)
    J[view.cut_edges] = view.cut_sign
    B = net.incidence()
    L = net.laplacian()
    rhs = -(B.T @ (c * J))
    # gauge: pin vertex 0
    x, _, _, _ = _solve_spd(L[1:, 1:], np.asarray(rhs[1:]).ravel(), tol)
    f = np.concatenate([[0.0], x])
    g = B @ f + J
    C = math.fsum(c * g * g)
    return 1.0 / C


@dataclass(frozen=True)
class ResdifGap:
    """Both sides of the edge-removal bound; ``lhs`` is ``inf`` if removal disconnects."""

    lhs: float
    rhs: float
    disconnected: bool
    theta_D: float
    energy_H: float
    energy_D: float
    around: float
    resistance: float

    @property
    def holds(self) -> bool:
        return (not self.disconnected) and self.lhs <= self.rhs + 1e-8


def resdif_gap(net: Network, t: Terminals, D, H, around: AroundView | None,
               tol: float = DEFAULT_TOL) -> ResdifGap:
    """Compare ``R^{\\D} - R`` with ``E(theta,H) + 2 theta(D)^2 R(around H) - E(theta,D)``.

    ``H`` is expected to be an annulus surrounding ``D`` (its around view is
    ``around``), so that flow blocked at ``D`` can be rerouted along contours of
    ``H``.  With ``D`` empty the around term is irrelevant and may be ``None``.
    """
    base = solve_two_terminal(net, t, tol)
    d_mask = _edge_mask(net, D)
    h_mask = _edge_mask(net, H)
    if np.any(d_mask & h_mask):
        raise ValueError("D and H must be disjoint")
    e_h = dirichlet_energy(net, base.current, h_mask)
    if not d_mask.any():
        return ResdifGap(0.0, e_h, False, 0.0, e_h, 0.0, float("nan"), base.resistance)
    e_d = dirichlet_energy(net, base.current, d_mask)
    theta_d = current_through_set(net, base, d_mask)
    r_around = around_resistance(around, tol)
    rhs = e_h + 2.0 * theta_d ** 2 * r_around - e_d
    try:
        removed = solve_two_terminal(net.without_edges(np.nonzero(d_mask)[0]), t, tol)
    except ConnectivityError:
        return ResdifGap(float("inf"), rhs, True, theta_d, e_h, e_d, r_around, base.resistance)
    return ResdifGap(removed.resistance - base.resistance, rhs, False, theta_d, e_h, e_d,
                     r_around, base.resistance)


def _as_set(s):
    return np.unique(np.atleast_1d(np.asarray(s, dtype=np.int64)))


def green_function(net: Network, V, x: int, y: int, tol: float = DEFAULT_TOL) -> float:
    """Expected visits to ``y`` before leaving ``V`` for the walk started at ``x``.

    Computed as ``pi(y) (R(x,Z) + R(y,Z) - R(x,y)) / 2`` on the network with
    ``Z = V^c`` wired into one vertex.  Returns 0 if ``x`` or ``y`` is outside ``V``.
    """
    V = _as_set(V)
    if x not in V or y not in V:
        return 0.0
    Z = np.setdiff1d(np.arange(net.n_vertices), V)
    if Z.size == 0:
        raise ValueError("V must have a nonempty complement")
    pi_y = float(net.vertex_mass()[y])
    wired, label = contract(net, [Z])
    z, xv, yv = 0, int(label[x]), int(label[y])
    if xv == yv:
        return pi_y * effective_resistance(wired, [xv], [z], tol)
    rxz = effective_resistance(wired, [xv], [z], tol)
    ryz = effective_resistance(wired, [yv], [z], tol)
    rxy = effective_resistance(wired, [xv], [yv], tol)
    return 0.5 * pi_y * (rxz + ryz - rxy)


def hitting_probability(net: Network, v: int, A, Z, tol: float = DEFAULT_TOL) -> float:
    """``P^v(tau_A < tau_Z)`` from three resistances on the network with ``A`` and ``Z`` wired.

    ``(R(v,Z) + R(A,Z) - R(v,A)) / (2 R(A,Z))``, clipped to ``[0, 1]``.
    """
    A, Z = _as_set(A), _as_set(Z)
    if v in A or v in Z:
        raise ValueError("v must lie outside A and Z")
    if np.intersect1d(A, Z).size:
        raise ValueError("A and Z must be disjoint")
    wired, label = contract(net, [A, Z])
    a, z, vv = 0, 1, int(label[v])
    rvz = effective_resistance(wired, [vv], [z], tol)
    raz = effective_resistance(wired, [a], [z], tol)
    rva = effective_resistance(wired, [vv], [a], tol)
    p = (rvz + raz - rva) / (2.0 * raz)
    return float(min(1.0, max(0.0, p)))
