"""Conductance-weighted random walks: simulation, exact exit statistics, rescaled paths."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numba as nb
import numpy as np
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .network import Network, NetworkError

__all__ = [
    "Categorical",
    "WalkStream",
    "ExitRecord",
    "ExitBatch",
    "ExitMeasure",
    "RescaledPath",
    "DegreeError",
    "BudgetError",
    "StructureError",
    "step_distribution",
    "Walker",
    "simulate_until_exit",
    "exact_exit_expectation",
    "green_matrix",
    "harmonic_measure",
    "exit_measure",
    "chi",
    "rescaled_path",
    "cmp_distance",
    "write_trace",
]

DEFAULT_BUDGET = 10**9
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


class DegreeError(NetworkError):
    """Walk from a vertex without neighbors."""


class StructureError(NetworkError):
    """The domain has no way out."""


class BudgetError(RuntimeError):
    """Step budget exhausted; ``record`` holds the walk so far."""

    def __init__(self, record):
        super().__init__(f"step budget exhausted after {record.steps} steps at vertex {record.exit_vertex}")
        self.record = record


def _splitmix_py(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class WalkStream:
    """Counter-based stream for one replica.

    The key is ``splitmix64(splitmix64(seed) ^ replica)``; draw ``i`` is
    ``splitmix64(key + i * golden) >> 11`` scaled to ``[0, 1)``.  Replicas are
    independent of execution order.
    """

    seed: int
    replica: int = 0

    @property
    def key(self) -> int:
        return _splitmix_py(_splitmix_py(self.seed & _MASK64) ^ (self.replica & _MASK64))

    def uniforms(self, count: int, offset: int = 0) -> np.ndarray:
        return _uniform_block(np.uint64(self.key), np.uint64(offset), count)


@nb.njit(cache=True)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def _uniform(key, counter):
    z = _mix(key + counter * _GOLDEN + _GOLDEN)
    return float(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def _uniform_block(key, offset, count):
    out = np.empty(count)
    for i in range(count):
        out[i] = _uniform(key, offset + np.uint64(i))
    return out


@nb.njit(cache=True)
def _build_alias(indptr, weights):
    n = indptr.shape[0] - 1
    accept = np.ones(weights.shape[0])
    alias = np.zeros(weights.shape[0], dtype=np.int64)
    for v in range(n):
        a, b = indptr[v], indptr[v + 1]
        d = b - a
        if d == 0:
            continue
        tot = 0.0
        for k in range(a, b):
            tot += weights[k]
        scaled = np.empty(d)
        for k in range(d):
            scaled[k] = weights[a + k] * d / tot
            alias[a + k] = k
        small = np.empty(d, dtype=np.int64)
        large = np.empty(d, dtype=np.int64)
        ns = 0
        nl = 0
        for k in range(d):
            if scaled[k] < 1.0:
                small[ns] = k
                ns += 1
            else:
                large[nl] = k
                nl += 1
        while ns > 0 and nl > 0:
            ns -= 1
            s = small[ns]
            l = large[nl - 1]
            accept[a + s] = scaled[s]
            alias[a + s] = l
            scaled[l] = scaled[l] + scaled[s] - 1.0
            if scaled[l] < 1.0:
                nl -= 1
                small[ns] = l
                ns += 1
        while nl > 0:
            nl -= 1
            accept[a + large[nl]] = 1.0
        while ns > 0:
            ns -= 1
            accept[a + small[ns]] = 1.0
    return accept, alias


@nb.njit(cache=True)
def _walk(indptr, nbr, accept, alias, inside, start, key, counter0, budget, trace):
    """Walk until leaving ``inside``; returns (vertex, steps, next counter, finished)."""
    x = start
    steps = 0
    ctr = counter0
    cap = trace.shape[0]
    if cap > 0:
        trace[0] = x
    while inside[x]:
        if steps >= budget:
            return x, steps, ctr, False
        a = indptr[x]
        d = indptr[x + 1] - a
        u = _uniform(key, ctr) * d
        ctr += np.uint64(1)
        j = int(u)
        if j >= d:
            j = d - 1
        if u - j < accept[a + j]:
            x = nbr[a + j]
        else:
            x = nbr[a + alias[a + j]]
        steps += 1
        if steps < cap:
            trace[steps] = x
    return x, steps, ctr, True


@nb.njit(cache=True)
def _walk_batch(indptr, nbr, accept, alias, inside, starts, cum_w, keys, budget):
    r = keys.shape[0]
    exits = np.empty(r, dtype=np.int64)
    steps = np.empty(r, dtype=np.int64)
    ok = np.empty(r, dtype=np.bool_)
    empty = np.empty(0, dtype=np.int64)
    for i in range(r):
        ctr = np.uint64(0)
        s = starts[0]
        if starts.shape[0] > 1:
            u = _uniform(keys[i], ctr)
            ctr += np.uint64(1)
            s = starts[starts.shape[0] - 1]
            for k in range(starts.shape[0]):
                if u < cum_w[k]:
                    s = starts[k]
                    break
        x, n, _, fin = _walk(indptr, nbr, accept, alias, inside, s, keys[i], ctr, budget, empty)
        exits[i] = x
        steps[i] = n
        ok[i] = fin
    return exits, steps, ok


@dataclass(frozen=True)
class Categorical:
    support: np.ndarray
    probs: np.ndarray


def step_distribution(net: Network, v: int) -> Categorical:
    """Next-vertex law from ``v``: neighbor ``w`` with probability ``c(v,w) / sum_u c(v,u)``."""
    indptr, nbr, eid = net.adjacency()
    a, b = indptr[v], indptr[v + 1]
    if a == b:
        raise DegreeError(f"vertex {v} has no neighbors")
    c = net.conductance[eid[a:b]]
    return Categorical(nbr[a:b].copy(), c / c.sum())


@dataclass(frozen=True)
class ExitRecord:
    exit_vertex: int
    steps: int
    trace: np.ndarray | None = None


@dataclass(frozen=True)
class ExitBatch:
    """Exit vertices and step counts of consecutive replicas."""

    exits: np.ndarray
    steps: np.ndarray
    first_replica: int

    def mean_steps(self) -> tuple[float, float]:
        """Sample mean and its standard error."""
        s = self.steps.astype(float)
        return float(s.mean()), float(s.std(ddof=1) / np.sqrt(s.size)) if s.size > 1 else float("nan")


class Walker:
    """Alias-table sampler for the walk on a fixed network and domain.

    Parameters
    ----------
    net : Network
    domain : vertex set or boolean mask
        The walk stops at the first vertex outside ``domain``.
    """

    def __init__(self, net: Network, domain):
        self.net = net
        indptr, nbr, eid = net.adjacency()
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.nbr = np.ascontiguousarray(nbr, dtype=np.int64)
        w = np.ascontiguousarray(net.conductance[eid])
        self.accept, self.alias = _build_alias(self.indptr, w)
        self.inside = _domain_mask(net, domain)
        deg = np.diff(self.indptr)
        if np.any(self.inside & (deg == 0)):
            raise DegreeError("domain contains an isolated vertex")

    def run(self, start: int, stream: WalkStream, keep_trace: bool = False,
            budget: int = DEFAULT_BUDGET) -> ExitRecord:
        key = np.uint64(stream.key)
        cap = 1024 if keep_trace else 0
        while True:
            trace = np.empty(cap, dtype=np.int64)
            x, n, _, fin = _walk(self.indptr, self.nbr, self.accept, self.alias, self.inside,
                                 int(start), key, np.uint64(0), int(budget), trace)
            if not keep_trace or n < cap:
                break
            # rerun with a buffer large enough for the whole trace
            cap = n + 1
        rec = ExitRecord(int(x), int(n), trace[:n + 1].copy() if keep_trace else None)
        if not fin:
            raise BudgetError(rec)
        return rec

    def batch(self, start, seed: int, replicas: int, first_replica: int = 0,
              budget: int = DEFAULT_BUDGET) -> ExitBatch:
        """Replicas ``first_replica .. first_replica + replicas - 1``.

        ``start`` is a vertex or a ``(corners, weights)`` pair; in the latter case
        each replica first draws a corner.
        """
        starts, cum = _start_spec(start)
        keys = np.array([WalkStream(seed, first_replica + i).key for i in range(replicas)], dtype=np.uint64)
        exits, steps, ok = _walk_batch(self.indptr, self.nbr, self.accept, self.alias, self.inside,
                                       starts, cum, keys, int(budget))
        if not ok.all():
            i = int(np.argmin(ok))
            raise BudgetError(ExitRecord(int(exits[i]), int(steps[i])))
        return ExitBatch(exits, steps, first_replica)


def _start_spec(start):
    if np.ndim(start) == 0:
        return np.array([int(start)], dtype=np.int64), np.array([1.0])
    corners, weights = start
    corners = np.asarray(corners, dtype=np.int64)
    w = np.asarray(weights, dtype=float)
    if corners.shape != (3,) or w.shape != (3,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("barycentric start needs three corners and non-negative weights summing to 1")
    cum = np.cumsum(w)
    cum[-1] = 1.0 + 1e-300
    return corners, cum


def _domain_mask(net: Network, domain) -> np.ndarray:
    d = np.asarray(domain)
    if d.dtype == bool:
        if d.shape != (net.n_vertices,):
            raise ValueError("domain mask has the wrong length")
        return d.copy()
    mask = np.zeros(net.n_vertices, dtype=bool)
    mask[d.astype(np.int64)] = True
    return mask


def simulate_until_exit(net: Network, start: int, domain, stream: WalkStream, keep_trace: bool = False,
                        budget: int = DEFAULT_BUDGET, walker: Walker | None = None) -> ExitRecord:
    """Run one walk from ``start`` until it first leaves ``domain``.

    Deterministic given ``stream``; a start outside the domain returns 0 steps.
    Raises :class:`BudgetError` (carrying the partial record) past ``budget`` steps.
    """
    walker = Walker(net, domain) if walker is None else walker
    return walker.run(start, stream, keep_trace, budget)


def _domain_system(net: Network, domain):
    mask = _domain_mask(net, domain)
    idx = np.nonzero(mask)[0]
    L = net.laplacian()
    L_dd = L[idx][:, idx].tocsc()
    # every component of the domain must touch the outside
    leak = np.asarray(L[idx][:, ~mask].sum(axis=1)).ravel() != 0
    sub = abs(L_dd) > 0
    _, comp = connected_components(sub, directed=False)
    leaky = np.zeros(comp.max() + 1 if comp.size else 0, dtype=bool)
    leaky[comp[leak]] = True
    if comp.size and not leaky.all():
        raise StructureError("domain has a component with no exit")
    return mask, idx, L_dd


def exact_exit_expectation(net: Network, domain, start: int) -> float:
    """``E^start[tau]``: solves ``L_DD h = pi_D``, the symmetric form of ``h = 1 + P h``."""
    mask = _domain_mask(net, domain)
    if not mask[start]:
        return 0.0
    mask, idx, L_dd = _domain_system(net, mask)
    pi = net.vertex_mass()[idx]
    h = spla.spsolve(L_dd, pi)
    return float(np.atleast_1d(h)[np.searchsorted(idx, start)])


def green_matrix(net: Network, domain) -> tuple[np.ndarray, np.ndarray]:
    """Dense Green matrix ``G[x, y]`` on the domain (small instances) and its vertex ids."""
    mask, idx, L_dd = _domain_system(net, domain)
    inv = np.linalg.inv(L_dd.toarray())
    return inv * net.vertex_mass()[idx][None, :], idx


def harmonic_measure(net: Network, domain, start: int) -> dict:
    """Exact exit distribution ``{z: P^start(X_tau = z)}`` from one linear solve."""
    mask = _domain_mask(net, domain)
    if not mask[start]:
        return {int(start): 1.0}
    mask, idx, L_dd = _domain_system(net, mask)
    e = np.zeros(idx.size)
    e[np.searchsorted(idx, start)] = 1.0
    g = np.atleast_1d(spla.spsolve(L_dd, e))
    pos = -np.ones(net.n_vertices, dtype=np.int64)
    pos[idx] = np.arange(idx.size)
    u, v = net.edges[:, 0], net.edges[:, 1]
    c = net.conductance
    out: dict[int, float] = {}
    for a, b in ((u, v), (v, u)):
        sel = mask[a] & ~mask[b]
        for y, z, ce in zip(a[sel], b[sel], c[sel]):
            out[int(z)] = out.get(int(z), 0.0) + g[pos[y]] * ce
    return out


@dataclass(frozen=True)
class ExitMeasure:
    """Empirical exit distribution."""

    vertices: np.ndarray
    counts: np.ndarray
    samples: int

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.samples

    def as_dict(self) -> dict:
        return {int(v): float(f) for v, f in zip(self.vertices, self.frequencies)}

    def total_variation(self, law: dict) -> float:
        emp = self.as_dict()
        keys = set(emp) | set(law)
        return 0.5 * sum(abs(emp.get(k, 0.0) - law.get(k, 0.0)) for k in keys)

    def write_csv(self, net: Network, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vertex_index", "x", "y", "count", "frequency"])
            for v, cnt, fr in zip(self.vertices, self.counts, self.frequencies):
                x, y = net.coords[v]
                w.writerow([int(v), repr(float(x)), repr(float(y)), int(cnt), repr(float(fr))])
        return path


def exit_measure(net: Network, start, domain, samples: int, seed: int, first_replica: int = 0,
                 walker: Walker | None = None) -> ExitMeasure:
    """Empirical exit law over ``samples`` replicas.

    ``start`` is a vertex or ``(corners, weights)`` for a barycentric start over
    a lattice triangle: each replica first picks a corner with the given weights.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    walker = Walker(net, domain) if walker is None else walker
    b = walker.batch(start, seed, samples, first_replica)
    verts, counts = np.unique(b.exits, return_counts=True)
    return ExitMeasure(verts, counts, samples)


def chi(n: int, zeta: int, gamma: float) -> float:
    """Time scale ``2^{(2 + gamma^2/2) n} zeta^2``."""
    return 2.0 ** ((2.0 + 0.5 * gamma * gamma) * n) * zeta * zeta


@dataclass(frozen=True)
class RescaledPath:
    """Piecewise-linear path through ``points`` at times ``times`` (= step / chi).

    Evaluation before 0 or after the last time is constant.
    """

    times: np.ndarray
    points: np.ndarray
    chi: float

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, float))
        if self.times.size == 1:
            return np.repeat(self.points[:1], t.size, axis=0)
        x = np.interp(t, self.times, self.points[:, 0])
        y = np.interp(t, self.times, self.points[:, 1])
        return np.column_stack([x, y])

    @property
    def duration(self) -> float:
        return float(self.times[-1])


def rescaled_path(record: ExitRecord, net: Network, n: int, zeta: int, gamma: float) -> RescaledPath:
    if record.trace is None:
        raise ValueError("record has no trace")
    c = chi(n, zeta, gamma)
    pts = net.coords[record.trace]
    return RescaledPath(np.arange(len(record.trace)) / c, pts, c)


@nb.njit(cache=True)
def _frechet(p, q):
    n, m = p.shape[0], q.shape[0]
    prev = np.empty(m)
    cur = np.empty(m)
    for i in range(n):
        for j in range(m):
            d = np.sqrt((p[i, 0] - q[j, 0]) ** 2 + (p[i, 1] - q[j, 1]) ** 2)
            if i == 0 and j == 0:
                best = d
            elif i == 0:
                best = max(cur[j - 1], d)
            elif j == 0:
                best = max(prev[0], d)
            else:
                best = max(min(prev[j], prev[j - 1], cur[j - 1]), d)
            cur[j] = best
        prev, cur = cur, prev
    return prev[m - 1]


def _resample(path: RescaledPath, resolution: int) -> np.ndarray:
    t = np.linspace(0.0, path.duration, resolution)
    return np.ascontiguousarray(path(t))


def cmp_distance(p1: RescaledPath, p2: RescaledPath, resolution: int = 512) -> float:
    """Curve distance modulo increasing reparameterization (discrete Fréchet).

    Both paths are sampled at ``resolution`` equally spaced times over their
    own durations; the coupling search runs over monotone index pairings.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    return float(_frechet(_resample(p1, resolution), _resample(p2, resolution)))


def write_trace(record: ExitRecord, net: Network, path) -> Path:
    """Trace as text lines ``step_index x y``."""
    if record.trace is None:
        raise ValueError("record has no trace")
    path = Path(path)
    with path.open("w") as fh:
        for k, v in enumerate(record.trace):
            x, y = net.coords[v]
            fh.write(f"{k} {x!r} {y!r}\n")
    return path
