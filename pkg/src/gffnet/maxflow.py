"""Max-flow / min-cut on undirected networks with real capacities (Dinic)."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

__all__ = ["FlowResult", "max_flow_min_cut"]

CUTOFF = 1e-12


@dataclass(frozen=True)
class FlowResult:
    """Maximal flow between two vertex sets.

    Attributes
    ----------
    value : float
        Flow strength from ``A`` to ``Z``.
    cut : ndarray of int
        Edge ids of a minimal cut (source side = residual-reachable set).
    cut_capacity : float
        Sum of capacities over ``cut``.
    flow : ndarray
        Signed flow per edge, positive along ``edges[e, 0] -> edges[e, 1]``.
    """

    value: float
    cut: np.ndarray
    cut_capacity: float
    flow: np.ndarray


class _Dinic:
    def __init__(self, n):
        self.n = n
        self.head = [-1] * n
        self.to = []
        self.cap = []
        self.nxt = []

    def add_undirected(self, u, v, c):
        # paired arcs, each the reverse of the other
        for a, b in ((u, v), (v, u)):
            self.to.append(b)
            self.cap.append(c)
            self.nxt.append(self.head[a])
            self.head[a] = len(self.to) - 1
        return len(self.to) - 2

    def add_directed(self, u, v, c):
        self.to += [v, u]
        self.cap += [c, 0.0]
        self.nxt += [self.head[u], self.head[v]]
        self.head[u] = len(self.to) - 2
        self.head[v] = len(self.to) - 1

    def _bfs(self, s, t):
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            a = self.head[u]
            while a != -1:
                v = self.to[a]
                if level[v] < 0 and self.cap[a] > CUTOFF:
                    level[v] = level[u] + 1
                    q.append(v)
                a = self.nxt[a]
        return level

    def _dfs(self, s, t, level, it):
        # iterative blocking-flow augmentation along level graph
        total = 0.0
        while True:
            stack = [s]
            arcs = []
            while stack:
                u = stack[-1]
                if u == t:
                    break
                a = it[u]
                advanced = False
                while a != -1:
                    v = self.to[a]
                    if self.cap[a] > CUTOFF and level[v] == level[u] + 1:
                        stack.append(v)
                        arcs.append(a)
                        advanced = True
                        break
                    a = self.nxt[a]
                    it[u] = a
                if not advanced:
                    stack.pop()
                    if arcs:
                        prev = arcs.pop()
                        it[stack[-1]] = self.nxt[prev]
                    level[u] = -1
            if not stack:
                return total
            push = min(self.cap[a] for a in arcs)
            for a in arcs:
                self.cap[a] -= push
                self.cap[a ^ 1] += push
            total += push

    def run(self, s, t):
        flow = 0.0
        while True:
            level = self._bfs(s, t)
            if level[t] < 0:
                return flow
            flow += self._dfs(s, t, level, list(self.head))

    def reachable(self, s):
        seen = np.zeros(self.n, dtype=bool)
        seen[s] = True
        q = deque([s])
        while q:
            u = q.popleft()
            a = self.head[u]
            while a != -1:
                v = self.to[a]
                if not seen[v] and self.cap[a] > CUTOFF:
                    seen[v] = True
                    q.append(v)
                a = self.nxt[a]
        return seen


def max_flow_min_cut(edges, capacity, A, Z, n_vertices: int | None = None) -> FlowResult:
    """Maximal flow from vertex set ``A`` to ``Z`` over undirected capacitated edges.

    Parameters
    ----------
    edges : (E, 2) int array
    capacity : (E,) array of non-negative reals
    A, Z : disjoint vertex sets, each treated as a single supernode.
    n_vertices : int, optional
        Defaults to ``edges.max() + 1``.

    Examples
    --------
    >>> r = max_flow_min_cut([[0, 1]], [3.0], [0], [1])
    >>> r.value, r.cut.tolist()
    (3.0, [0])
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    cap = np.asarray(capacity, dtype=float).reshape(-1)
    if np.any(cap < 0):
        raise ValueError("capacities must be non-negative")
    n = int(edges.max()) + 1 if n_vertices is None else int(n_vertices)
    A = np.unique(np.asarray(A, dtype=np.int64))
    Z = np.unique(np.asarray(Z, dtype=np.int64))
    if np.intersect1d(A, Z).size:
        raise ValueError("A and Z must be disjoint")
    s, t = n, n + 1
    g = _Dinic(n + 2)
    arc = np.empty(len(edges), dtype=np.int64)
    for e, ((u, v), c) in enumerate(zip(edges.tolist(), cap.tolist())):
        arc[e] = g.add_undirected(u, v, c)
    big = float(cap.sum()) + 1.0
    for a in A.tolist():
        g.add_directed(s, a, big)
    for z in Z.tolist():
        g.add_directed(z, t, big)
    value = g.run(s, t)
    residual = np.asarray(g.cap)
    flow = cap - residual[arc]
    side = g.reachable(s)[:n]
    cut = np.nonzero(side[edges[:, 0]] != side[edges[:, 1]])[0]
    return FlowResult(value, cut, float(cap[cut].sum()), flow)
