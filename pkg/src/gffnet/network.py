"""Resistor networks on the rescaled lattice, planar duals and annulus views."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .field import FieldSample, GridSpec

__all__ = [
    "Network",
    "Terminals",
    "AnnulusView",
    "AroundView",
    "NetworkError",
    "ShapeError",
    "build_network",
    "rectangle_network",
    "dual_network",
    "annulus_views",
    "around_dual",
    "contract",
    "write_edgelist",
    "read_edgelist",
]

EDGELIST_VERSION = 1
# exp(+-700) is the edge of float64
LOG_GUARD = 700.0


class NetworkError(ValueError):
    """Invalid network geometry or parameters."""


class ShapeError(NetworkError):
    """The operation needs a full lattice rectangle."""


@dataclass(frozen=True, eq=False)
class Network:
    """Undirected simple graph with per-edge log-resistance.

    Parameters
    ----------
    coords : (N, 2) array
        Planar vertex positions.
    edges : (E, 2) int array
        Endpoint indices; edge ``e`` is oriented ``edges[e, 0] -> edges[e, 1]``
        when a signed current is stored on it.
    log_resistance : (E,) array
        ``log r_e``; conductance is ``exp(-log r_e)``.
    midpoints : (E, 2) array, optional
        Point at which the field was read for each edge.  Defaults to the
        geometric midpoint.
    lattice_index : (N, 2) int array, optional
        Integer lattice coordinates for networks cut from ``Z_n^2``.
    spacing : float, optional
        Lattice spacing matching ``lattice_index``.
    terminals : tuple of int arrays
        Designated vertex groups (e.g. left and right sides of a rectangle).
    parent_edges : (E,) int array, optional
        Edge ids in the network this one was cut from.
    """

    coords: np.ndarray
    edges: np.ndarray
    log_resistance: np.ndarray
    midpoints: np.ndarray | None = None
    lattice_index: np.ndarray | None = None
    spacing: float | None = None
    terminals: tuple = ()
    parent_edges: np.ndarray | None = None
    provenance: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1, 2)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        logr = np.asarray(self.log_resistance, dtype=float).reshape(-1)
        if logr.shape[0] != edges.shape[0]:
            raise NetworkError("one log-resistance per edge required")
        if edges.size and (edges.min() < 0 or edges.max() >= coords.shape[0]):
            raise NetworkError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise NetworkError("self-loops are not allowed")
        if not np.all(np.isfinite(logr)) or np.any(np.abs(logr) >= LOG_GUARD):
            raise NetworkError("log-resistances must be finite and below the overflow guard")
        mids = (0.5 * (coords[edges[:, 0]] + coords[edges[:, 1]])
                if self.midpoints is None else np.asarray(self.midpoints, float).reshape(-1, 2))
        for name, arr in (("coords", coords), ("edges", edges), ("log_resistance", logr), ("midpoints", mids)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.lattice_index is not None:
            li = np.asarray(self.lattice_index, dtype=np.int64).reshape(-1, 2)
            li.flags.writeable = False
            object.__setattr__(self, "lattice_index", li)
        groups = tuple(np.unique(np.asarray(g, dtype=np.int64)) for g in self.terminals)
        object.__setattr__(self, "terminals", groups)

    @property
    def n_vertices(self) -> int:
        return self.coords.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def conductance(self) -> np.ndarray:
        if "c" not in self._cache:
            self._cache["c"] = np.exp(-self.log_resistance)
        return self._cache["c"]

    @property
    def resistance(self) -> np.ndarray:
        return np.exp(self.log_resistance)

    def incidence(self) -> sp.csr_matrix:
        """Signed edge-vertex incidence ``B`` with ``(B f)_e = f(tail) - f(head)``."""
        if "B" not in self._cache:
            e = self.n_edges
            rows = np.repeat(np.arange(e), 2)
            cols = self.edges.reshape(-1)
            vals = np.tile([1.0, -1.0], e)
            self._cache["B"] = sp.csr_matrix((vals, (rows, cols)), shape=(e, self.n_vertices))
        return self._cache["B"]

    def laplacian(self, conductance: np.ndarray | None = None) -> sp.csr_matrix:
        c = self.conductance if conductance is None else conductance
        if conductance is None and "L" in self._cache:
            return self._cache["L"]
        u, v = self.edges[:, 0], self.edges[:, 1]
        n = self.n_vertices
        off = sp.coo_matrix((np.concatenate([-c, -c]), (np.concatenate([u, v]), np.concatenate([v, u]))),
                            shape=(n, n))
        deg = np.bincount(u, weights=c, minlength=n) + np.bincount(v, weights=c, minlength=n)
        lap = (off + sp.diags(deg)).tocsr()
        if conductance is None:
            self._cache["L"] = lap
        return lap

    def vertex_mass(self) -> np.ndarray:
        """``pi(y)``: total conductance of edges at each vertex."""
        c = self.conductance
        n = self.n_vertices
        return np.bincount(self.edges[:, 0], weights=c, minlength=n) + \
            np.bincount(self.edges[:, 1], weights=c, minlength=n)

    def adjacency(self):
        """CSR-style neighbor lists: ``(indptr, neighbors, edge_ids)``."""
        if "adj" not in self._cache:
            n = self.n_vertices
            u, v = self.edges[:, 0], self.edges[:, 1]
            src = np.concatenate([u, v])
            dst = np.concatenate([v, u])
            eid = np.concatenate([np.arange(self.n_edges)] * 2)
            order = np.lexsort((dst, src))
            indptr = np.concatenate([[0], np.cumsum(np.bincount(src, minlength=n))])
            self._cache["adj"] = (indptr, dst[order], eid[order])
        return self._cache["adj"]

    def neighbors(self, v: int) -> np.ndarray:
        indptr, nbr, _ = self.adjacency()
        return nbr[indptr[v]:indptr[v + 1]]

    def with_log_resistance(self, logr, provenance: str | None = None) -> "Network":
        return Network(self.coords, self.edges, logr, self.midpoints, self.lattice_index, self.spacing,
                       self.terminals, self.parent_edges,
                       self.provenance if provenance is None else provenance)

    def with_terminals(self, *groups) -> "Network":
        return Network(self.coords, self.edges, self.log_resistance, self.midpoints, self.lattice_index,
                       self.spacing, tuple(groups), self.parent_edges, self.provenance)

    def without_edges(self, edge_ids) -> "Network":
        """Drop edges (infinite resistance); vertices are kept."""
        keep = np.ones(self.n_edges, dtype=bool)
        keep[np.asarray(list(edge_ids), dtype=np.int64)] = False
        parent = np.nonzero(keep)[0] if self.parent_edges is None else self.parent_edges[keep]
        return Network(self.coords, self.edges[keep], self.log_resistance[keep], self.midpoints[keep],
                       self.lattice_index, self.spacing, self.terminals, parent, self.provenance)

    def subnetwork(self, vertex_mask) -> tuple["Network", np.ndarray]:
        """Induced sub-network; returns it with the old-to-new vertex map (-1 if dropped)."""
        mask = np.asarray(vertex_mask, dtype=bool)
        new_id = -np.ones(self.n_vertices, dtype=np.int64)
        new_id[mask] = np.arange(int(mask.sum()))
        keep = mask[self.edges[:, 0]] & mask[self.edges[:, 1]]
        parent = np.nonzero(keep)[0]
        li = None if self.lattice_index is None else self.lattice_index[mask]
        sub = Network(self.coords[mask], new_id[self.edges[keep]], self.log_resistance[keep],
                      self.midpoints[keep], li, self.spacing, (), parent, self.provenance)
        return sub, new_id

    def vertex_at(self, index) -> int:
        """Vertex id with lattice index ``(I, J)``."""
        if self.lattice_index is None:
            raise NetworkError("network has no lattice indexing")
        key = self._lattice_lookup()
        try:
            return key[(int(index[0]), int(index[1]))]
        except KeyError:
            raise NetworkError(f"lattice point {tuple(index)} not in network") from None

    def _lattice_lookup(self) -> dict:
        if "lut" not in self._cache:
            self._cache["lut"] = {(int(i), int(j)): v for v, (i, j) in enumerate(self.lattice_index)}
        return self._cache["lut"]

    def nearest_vertex(self, point) -> int:
        d = np.sum((self.coords - np.asarray(point, float)) ** 2, axis=1)
        return int(np.argmin(d))


@dataclass(frozen=True)
class Terminals:
    """Disjoint source set ``A`` and sink set ``Z``."""

    A: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        a = np.unique(np.atleast_1d(np.asarray(self.A, dtype=np.int64)))
        z = np.unique(np.atleast_1d(np.asarray(self.Z, dtype=np.int64)))
        if a.size == 0 or z.size == 0:
            raise NetworkError("terminal sets must be nonempty")
        if np.intersect1d(a, z).size:
            raise NetworkError("terminal sets must be disjoint")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "Z", z)

    @classmethod
    def of(cls, net: Network) -> "Terminals":
        if len(net.terminals) != 2:
            raise NetworkError("network does not carry exactly two terminal groups")
        return cls(net.terminals[0], net.terminals[1])

    def check(self, net: Network) -> None:
        n = net.n_vertices
        if self.A.max() >= n or self.Z.max() >= n or self.A.min() < 0 or self.Z.min() < 0:
            raise NetworkError("terminal vertex not in network")


def _lattice_rectangle(i0, i1, j0, j1, spacing):
    nx, ny = i1 - i0 + 1, j1 - j0 + 1
    ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1))
    index = np.column_stack([ii.ravel(), jj.ravel()])
    vid = np.arange(nx * ny).reshape(ny, nx)
    horiz = np.column_stack([vid[:, :-1].ravel(), vid[:, 1:].ravel()])
    vert = np.column_stack([vid[:-1, :].ravel(), vid[1:, :].ravel()])
    edges = np.vstack([horiz, vert])
    left = vid[:, 0].copy()
    right = vid[:, -1].copy()
    return index, edges, left, right


def build_network(sample: FieldSample, gamma: float, box=None) -> Network:
    """Network on ``Z_n^2 ∩ box`` with ``log r_e = gamma * field(m_e)``.

    The result carries the left and right sides of the box as its two terminal
    groups.
    """
    grid = sample.grid
    if box is None:
        sub = grid
    else:
        sub = GridSpec.from_box(grid.n, box, grid.zeta)
        if not grid.contains(sub.box):
            raise NetworkError("box is not inside the sampled region")
    i0, i1, j0, j1 = sub.index_box
    if i1 <= i0 and j1 <= j0:
        raise NetworkError("box contains no edges")
    gi0, _, gj0, _ = grid.index_box
    index, edges, left, right = _lattice_rectangle(i0, i1, j0, j1, grid.spacing)
    # refined-lattice coordinates of every edge midpoint
    a = index[edges[:, 0]]
    b = index[edges[:, 1]]
    mcol = (a[:, 0] + b[:, 0]) - 2 * gi0
    mrow = (a[:, 1] + b[:, 1]) - 2 * gj0
    vals = sample.values[mrow, mcol]
    if gamma < 0:
        raise NetworkError("gamma must be non-negative")
    logr = gamma * vals
    if logr.size and np.max(np.abs(logr)) >= LOG_GUARD:
        raise NetworkError("gamma * field exceeds the overflow guard")
    s = grid.spacing
    coords = index * s
    mids = np.column_stack([mcol + 2 * gi0, mrow + 2 * gj0]) * (0.5 * s)
    prov = f"field n={grid.n} zeta={grid.zeta} seed={sample.seed} gamma={gamma} negated={sample.negated}"
    return Network(coords, edges, logr, mids, index, s, (left, right), None, prov)


def rectangle_network(width: int, height: int, log_resistance=None, spacing: float = 1.0,
                      origin=(0, 0)) -> Network:
    """``width x height``-cell lattice rectangle with explicit edge weights (default all 0)."""
    i0, j0 = origin
    index, edges, left, right = _lattice_rectangle(i0, i0 + width, j0, j0 + height, spacing)
    logr = np.zeros(len(edges)) if log_resistance is None else np.asarray(log_resistance, float)
    return Network(index * spacing, edges, logr, None, index, spacing, (left, right), None, "rectangle")


def _rect_info(net: Network):
    if net.lattice_index is None:
        raise ShapeError("dual needs a lattice network")
    li = net.lattice_index
    i0, j0 = li.min(axis=0)
    i1, j1 = li.max(axis=0)
    nx, ny = i1 - i0 + 1, j1 - j0 + 1
    if net.n_vertices != nx * ny or nx < 2 or ny < 2:
        raise ShapeError("network is not a full lattice rectangle")
    if net.n_edges != ny * (nx - 1) + nx * (ny - 1):
        raise ShapeError("network is not a full lattice rectangle")
    return int(i0), int(i1), int(j0), int(j1)


def _face_dual(net: Network, cell_id, outer_nodes, skip_edge, extra_coords, provenance):
    """Dual edges across every primal lattice edge not skipped.

    ``cell_id((I, J))`` maps the unit cell with lower-left corner ``(I, J)`` to a
    dual vertex id.  Edges whose two sides map to the same dual vertex are dropped.
    """
    li = net.lattice_index
    ends = li[net.edges]
    d_edges, d_logr, d_mids, primal = [], [], [], []
    for e in range(net.n_edges):
        if skip_edge(e):
            continue
        (ia, ja), (ib, jb) = ends[e]
        if ja == jb:
            i = min(ia, ib)
            f1, f2 = (i, ja - 1), (i, ja)
        else:
            j = min(ja, jb)
            f1, f2 = (ia - 1, j), (ia, j)
        u, v = cell_id(f1), cell_id(f2)
        if u == v:
            continue
        d_edges.append((u, v))
        d_logr.append(-net.log_resistance[e])
        d_mids.append(net.midpoints[e])
        primal.append(e)
    return d_edges, np.asarray(d_logr), np.asarray(d_mids), np.asarray(primal, dtype=np.int64)


def dual_network(net: Network) -> Network:
    """Up-down face dual of a left-right rectangle network.

    One dual vertex per unit face plus a top and a bottom outer node.  Every
    primal edge except the vertical edges inside the left and right terminal
    columns is crossed by exactly one dual edge, which keeps its midpoint and
    gets ``log r* = -log r``.  The dual terminals are ``({top}, {bottom})`` and
    ``R_LR(net) * R_UD(dual) = 1``.
    """
    i0, i1, j0, j1 = _rect_info(net)
    w, h = i1 - i0, j1 - j0
    top, bottom = w * h, w * h + 1
    s = 1.0 if net.spacing is None else net.spacing

    def cell_id(cell):
        ci, cj = cell[0] - i0, cell[1] - j0
        if cj >= h:
            return top
        if cj < 0:
            return bottom
        return cj * w + ci

    li = net.lattice_index
    ends = li[net.edges]

    def skip(e):
        (ia, ja), (ib, jb) = ends[e]
        return ia == ib and (ia == i0 or ia == i1)

    d_edges, d_logr, d_mids, primal = _face_dual(net, cell_id, None, skip, None, "")
    cj, ci = np.divmod(np.arange(w * h), w)
    centers = np.column_stack([(i0 + ci + 0.5) * s, (j0 + cj + 0.5) * s])
    xm = 0.5 * (i0 + i1) * s
    coords = np.vstack([centers, [[xm, (j1 + 0.5) * s], [xm, (j0 - 0.5) * s]]])
    return Network(coords, np.asarray(d_edges), d_logr, d_mids, None, s, ([top], [bottom]),
                   primal, f"up-down dual of [{net.provenance}]")


@dataclass(frozen=True, eq=False)
class AroundView:
    """Annulus network with an oriented cut for the around (contour) problem.

    ``cut_edges`` are the annulus edges crossing a ray from the inner to the
    outer boundary, oriented counterclockwise.  A potential that jumps by one
    across the cut winds once around the hole; the minimal Dirichlet energy of
    such a potential is the conductance of the contour family.
    """

    network: Network
    cut_edges: np.ndarray
    cut_sign: np.ndarray
    center_index: tuple[int, int]
    inner: int
    outer: int
    direction: str


@dataclass(frozen=True, eq=False)
class AnnulusView:
    """Across and around views of a square annulus.

    ``across`` is the annulus-restricted network whose two terminal groups are
    the inner and the outer boundary (``None`` for a single ring).  ``around``
    holds the same network with a unit cut.  ``vertex_map`` sends parent vertex
    ids to annulus ids (-1 outside); ``parent_edges`` lists the parent edge id of
    every annulus edge.
    """

    across: Network | None
    around: AroundView
    vertex_map: np.ndarray
    parent_edges: np.ndarray


_DIRECTIONS = {"+x": ((1, 0), (0, 1)), "+y": ((0, 1), (-1, 0)),
               "-x": ((-1, 0), (0, -1)), "-y": ((0, -1), (1, 0))}


def annulus_views(net: Network, center, r_inner: float, r_outer: float, slit: str = "+x") -> AnnulusView:
    """Square annulus ``r_inner <= |v - center|_inf <= r_outer`` of a lattice network.

    ``center`` is a lattice point (coordinates) and the radii are multiples of
    the spacing.  ``slit`` picks the ray carrying the cut.
    """
    if net.lattice_index is None or net.spacing is None:
        raise NetworkError("annulus views need a lattice network")
    s = net.spacing
    ci = np.rint(np.asarray(center, float) / s).astype(np.int64)
    if np.max(np.abs(ci * s - np.asarray(center, float))) > 1e-9 * max(1.0, s):
        raise NetworkError("annulus center must be a lattice point")
    a = int(round(r_inner / s))
    b = int(round(r_outer / s))
    if abs(a * s - r_inner) > 1e-9 or abs(b * s - r_outer) > 1e-9:
        raise NetworkError("radii must be multiples of the lattice spacing")
    if a < 1 or b < a:
        raise NetworkError("need 1 <= r_inner <= r_outer (in lattice units)")
    li = net.lattice_index
    lo = li.min(axis=0)
    hi = li.max(axis=0)
    if np.any(ci - b <= lo) or np.any(ci + b >= hi):
        raise NetworkError("annulus touches the network boundary")
    dist = np.max(np.abs(li - ci), axis=1)
    mask = (dist >= a) & (dist <= b)
    if int(mask.sum()) != (2 * b + 1) ** 2 - (2 * a - 1) ** 2:
        raise NetworkError("annulus is not fully contained in the network")
    sub, vmap = net.subnetwork(mask)
    sub = Network(sub.coords, sub.edges, sub.log_resistance, sub.midpoints, sub.lattice_index, s, (),
                  sub.parent_edges, f"annulus of [{net.provenance}]")
    sli = sub.lattice_index
    sdist = np.max(np.abs(sli - ci), axis=1)
    across = None
    if b > a:
        across = sub.with_terminals(np.nonzero(sdist == a)[0], np.nonzero(sdist == b)[0])
    if slit not in _DIRECTIONS:
        raise NetworkError(f"unknown slit direction {slit!r}")
    (dx, dy), (px, py) = _DIRECTIONS[slit]
    lut = {(int(i), int(j)): k for k, (i, j) in enumerate(sli)}
    eid = {}
    for k, (u, v) in enumerate(sub.edges):
        eid[(u, v)] = (k, 1.0)
        eid[(v, u)] = (k, -1.0)
    cut, sign = [], []
    for t in range(a, b + 1):
        p = (int(ci[0] + t * dx), int(ci[1] + t * dy))
        q = (p[0] + px, p[1] + py)
        k, sg = eid[(lut[p], lut[q])]
        cut.append(k)
        sign.append(sg)
    around = AroundView(sub, np.asarray(cut, dtype=np.int64), np.asarray(sign), (int(ci[0]), int(ci[1])),
                        a, b, slit)
    return AnnulusView(across, around, vmap, sub.parent_edges)


def around_dual(view: AroundView) -> Network:
    """Face dual of the annulus with terminals ``({hole}, {outside})`` and ``log r* = -log r``.

    The across resistance of this network is the reciprocal of the around
    resistance of ``view``.
    """
    net = view.network
    cx, cy = view.center_index
    a, b = view.inner, view.outer
    s = net.spacing
    cells = {}
    for i in range(cx - b, cx + b):
        for j in range(cy - b, cy + b):
            # cell center at (i + 1/2, j + 1/2)
            d = max(abs(2 * (i - cx) + 1), abs(2 * (j - cy) + 1))
            if a * 2 < d < b * 2:
                cells[(i, j)] = len(cells)
    hole, outside = len(cells), len(cells) + 1

    def cell_id(c):
        if c in cells:
            return cells[c]
        d = max(abs(2 * (c[0] - cx) + 1), abs(2 * (c[1] - cy) + 1))
        return hole if d < 2 * a else outside

    d_edges, d_logr, d_mids, primal = _face_dual(net, cell_id, None, lambda e: False, None, "")
    centers = np.array([[(i + 0.5) * s, (j + 0.5) * s] for (i, j) in cells]).reshape(-1, 2)
    coords = np.vstack([centers, [[cx * s, cy * s], [(cx + b + 1) * s, cy * s]]])
    return Network(coords, np.asarray(d_edges).reshape(-1, 2), d_logr, d_mids.reshape(-1, 2), None, s,
                   ([hole], [outside]), primal, "annulus dual")


def contract(net: Network, groups) -> tuple[Network, np.ndarray]:
    """Merge each vertex group into one vertex; parallel edges combine conductances.

    Returns the contracted network and the old-to-new vertex map.  The merged
    vertex of group ``g`` gets id ``g`` (groups come first).
    """
    n = net.n_vertices
    label = -np.ones(n, dtype=np.int64)
    for g, grp in enumerate(groups):
        grp = np.asarray(grp, dtype=np.int64)
        if np.any(label[grp] >= 0):
            raise NetworkError("contraction groups overlap")
        label[grp] = g
    rest = label < 0
    label[rest] = len(groups) + np.arange(int(rest.sum()))
    m = len(groups) + int(rest.sum())
    u = label[net.edges[:, 0]]
    v = label[net.edges[:, 1]]
    keep = u != v
    lo = np.minimum(u, v)[keep]
    hi = np.maximum(u, v)[keep]
    c = net.conductance[keep]
    key = lo * m + hi
    uniq, inv = np.unique(key, return_inverse=True)
    csum = np.bincount(inv, weights=c)
    new_edges = np.column_stack([uniq // m, uniq % m])
    coords = np.zeros((m, 2))
    counts = np.zeros(m)
    np.add.at(coords, label, net.coords)
    np.add.at(counts, label, 1.0)
    coords /= counts[:, None]
    mids = 0.5 * (coords[new_edges[:, 0]] + coords[new_edges[:, 1]])
    out = Network(coords, new_edges, -np.log(csum), mids, None, net.spacing, (), None,
                  f"contraction of [{net.provenance}]")
    return out, label


def write_edgelist(net: Network, path) -> Path:
    """Text edge list: header ``gffnet-edgelist <version> <vertices> <edges>``,
    then ``u v mid_x mid_y log_r`` per edge at 17 significant digits."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"gffnet-edgelist {EDGELIST_VERSION} {net.n_vertices} {net.n_edges}\n")
        for (u, v), (mx, my), lr in zip(net.edges, net.midpoints, net.log_resistance):
            fh.write(f"{u} {v} {mx:.17g} {my:.17g} {lr:.17g}\n")
    return path


def read_edgelist(path) -> Network:
    """Inverse of :func:`write_edgelist`; vertex coordinates are unknown (NaN)."""
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    if head[0] != "gffnet-edgelist" or int(head[1]) != EDGELIST_VERSION:
        raise NetworkError("not a gffnet edge list")
    nv, ne = int(head[2]), int(head[3])
    data = np.array([ln.split() for ln in lines[1:1 + ne]], dtype=float).reshape(-1, 5)
    coords = np.full((nv, 2), np.nan)
    return Network(coords, data[:, :2].astype(np.int64), data[:, 4], data[:, 2:4], provenance=str(path))
