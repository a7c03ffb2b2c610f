"""Registered experiments: each maps a config to rows, a summary and assertions."""
from __future__ import annotations

import itertools
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..field import GridSpec, sample_field
from ..maxflow import max_flow_min_cut
from ..measure import eta_measure, pi_measure
from ..network import Network, Terminals, annulus_views, build_network, dual_network
from ..resistance import (
    green_function,
    hitting_probability,
    path_decomposition,
    resdif_gap,
    solve_two_terminal,
)
from ..walk import (
    Walker,
    WalkStream,
    chi,
    cmp_distance,
    exact_exit_expectation,
    green_matrix,
    harmonic_measure,
    rescaled_path,
)
from .config import ExperimentConfig
from .stats import QuantileTable, binomial_ci, bootstrap_stream, estimate_quantiles, ols_slope_ci, replica_seed

__all__ = ["Row", "Assertion", "Outcome", "REGISTRY", "run_registered", "self_dual_resistance",
           "resdif_instance", "identity_environment"]


@dataclass(frozen=True)
class Row:
    n: int
    zeta: int
    replica: int
    stat: str
    value: float
    seed: int


@dataclass(frozen=True)
class Assertion:
    name: str
    kind: str  # "hard" or "statistical"
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class Outcome:
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)
    dat: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def check(self, name, kind, passed, **detail):
        self.assertions.append(Assertion(name, kind, bool(passed), detail))


def _geo_rng(seed: int, replica: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, replica, tag])))


def _run_tasks(fn, tasks, threads):
    """Apply ``fn`` to every task; failures come back as ``("error", task, message)``."""
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(threads) as ex:
            return list(ex.map(_guard, [fn] * len(tasks), tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    return [_guard(fn, t) for t in tasks]


def _guard(fn, task):
    try:
        return fn(task)
    except Exception as exc:  # reported with the replica index
        return ("error", task[1:], f"{type(exc).__name__}: {exc}", traceback.format_exc(limit=3))


def _collect(out: Outcome, results):
    good = []
    for r in results:
        if isinstance(r, tuple) and r and r[0] == "error":
            out.failures.append({"task": list(r[1]), "error": r[2]})
        else:
            good.append(r)
            out.rows.extend(r)
    return good


def _values(rows, stat, n=None):
    return np.array([r.value for r in rows if r.stat == stat and (n is None or r.n == n)])


# ---------------------------------------------------------------- geometry


def self_dual_resistance(n: int, zeta: int, k: int, gamma: float, seed: int, tol: float = 1e-10) -> float:
    """Left-right resistance of the ``(k+1) x k``-cell rectangle at scale ``n``."""
    grid = GridSpec.cells(n, k + 1, k, zeta, origin=(-((k + 1) // 2), -(k // 2)))
    net = build_network(sample_field(grid, seed=seed), gamma)
    return solve_two_terminal(net, tol=tol).resistance


def box_network(n: int, zeta: int, a: float, gamma: float, seed: int, b: float | None = None) -> Network:
    grid = GridSpec.centered(n, a, b, zeta)
    return build_network(sample_field(grid, seed=seed), gamma)


def interior_mask(net: Network) -> np.ndarray:
    li = net.lattice_index
    lo, hi = li.min(axis=0), li.max(axis=0)
    return np.all((li > lo) & (li < hi), axis=1)


def resdif_instance(n: int, zeta: int, gamma: float, seed: int, cells: int = 10, r_in: int = 2, r_out: int = 3,
                    tol: float = 1e-10):
    """Edge-removal bound on a ``cells``-square box: ``D`` is the hole of an annulus ``H`` at the center."""
    grid = GridSpec.cells(n, cells, cells, zeta, origin=(-(cells // 2), -(cells // 2)))
    net = build_network(sample_field(grid, seed=seed), gamma)
    s = net.spacing
    view = annulus_views(net, (0.0, 0.0), r_in * s, r_out * s)
    dist = np.max(np.abs(net.lattice_index), axis=1)
    hole = dist < r_in
    D = np.nonzero(hole[net.edges[:, 0]] | hole[net.edges[:, 1]])[0]
    H = view.parent_edges
    return resdif_gap(net, Terminals.of(net), D, H, view.around, tol)


# ---------------------------------------------------------------- duality-median


def _duality_task(task):
    cfg, n, rep = task
    z = cfg.zeta(n)
    seed = replica_seed(cfg.seed, rep)
    R = self_dual_resistance(n, z, int(cfg.geo("k", 8)), cfg.gamma, seed, cfg.tol)
    return [Row(n, z, rep, "R", R, seed)]


def duality_median(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    tasks = [(cfg, n, r) for n in cfg.n_list for r in range(cfg.replicas)]
    _collect(out, _run_tasks(_duality_task, tasks, cfg.threads))
    lo_band, hi_band = cfg.geo("band", [0.47, 0.53])
    for n in cfg.n_list:
        R = _values(out.rows, "R", n)
        k = int(np.sum(R <= 1.0))
        p = k / R.size
        ci = binomial_ci(k, R.size)
        out.summary[f"n={n}"] = {"P(R<=1)": p, "ci95": ci, "replicas": int(R.size),
                                 "median": float(np.median(R)), "k": int(cfg.geo("k", 8))}
        out.check(f"P(R<=1) in [{lo_band}, {hi_band}] at n={n}", "statistical", lo_band <= p <= hi_band,
                  value=p, ci95=ci, size=int(R.size))
        srt = np.sort(R)
        out.dat[f"ecdf_n{n}"] = ("R ecdf", np.column_stack([srt, np.arange(1, srt.size + 1) / srt.size]))
    return out


# ---------------------------------------------------------------- quantile-table


def _k_for(cfg, n):
    if "k" in cfg.geometry:
        return int(cfg.geometry["k"])
    return max(1, int(round(float(cfg.geo("side", 0.5)) * 2**n * cfg.zeta(n))))


def _quantile_task(task):
    cfg, n, rep = task
    z = cfg.zeta(n)
    seed = replica_seed(cfg.seed, rep)
    R = self_dual_resistance(n, z, _k_for(cfg, n), cfg.gamma, seed, cfg.tol)
    return [Row(n, z, rep, "R", R, seed)]


def quantile_table(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    tasks = [(cfg, n, r) for n in cfg.n_list for r in range(cfg.replicas)]
    _collect(out, _run_tasks(_quantile_task, tasks, cfg.threads))
    p = float(cfg.geo("p", 0.25))
    p_list = sorted({0.1, p, 0.5, 1 - p, 0.9})
    table = QuantileTable()
    for n in cfg.n_list:
        table.add(n, _values(out.rows, "R", n), p_list, cfg.seed)
    lam_max = float(cfg.geo("lambda_max", 5.0))
    lam = {n: table.lambda_hat(n, p) for n in cfg.n_list}
    ratio = {n: table.ratio(n, p) for n in cfg.n_list}
    slope = table.ratio_slope(p, cfg.seed)
    out.summary = {
        "p": p,
        "k": {n: _k_for(cfg, n) for n in cfg.n_list},
        "quantiles": {f"n={n},p={q}": vars(table.rows[(n, q)]) for n in cfg.n_list for q in p_list},
        "lambda_hat": lam,
        "ratio": ratio,
        "ratio_slope": {"estimate": slope[0], "ci95": [slope[1], slope[2]]},
    }
    out.check(f"Lambda_hat({p}) <= {lam_max}", "statistical", max(lam.values()) <= lam_max, lambda_hat=lam)
    out.check("per-scale ratio slope CI contains 0", "statistical", slope[1] <= 0.0 <= slope[2],
              slope=slope[0], ci95=[slope[1], slope[2]])
    out.dat["lambda"] = ("n lambda_hat", np.array([[n, lam[n]] for n in cfg.n_list], float))
    out.dat["ratio"] = ("n l(1-p)/l(p)", np.array([[n, ratio[n]] for n in cfg.n_list], float))
    return out


# ---------------------------------------------------------------- mesh-compare


def _mesh_task(task):
    cfg, n, rep = task
    seed = replica_seed(cfg.seed, rep)
    a = float(cfg.geo("a", 0.5))
    b = float(cfg.geo("b", a))
    rows = []
    logs = {}
    for z in cfg.geo("zetas", [2, 3]):
        net = box_network(n, int(z), a, cfg.gamma, seed, b)
        logs[z] = math.log(solve_two_terminal(net, tol=cfg.tol).resistance)
        rows.append(Row(n, int(z), rep, "logR", logs[z], seed))
    for z1, z2 in itertools.combinations(sorted(logs), 2):
        rows.append(Row(n, int(z2), rep, f"absdiff_{z1}_{z2}", abs(logs[z1] - logs[z2]), seed))
    return rows


def mesh_compare(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    tasks = [(cfg, n, r) for n in cfg.n_list for r in range(cfg.replicas)]
    _collect(out, _run_tasks(_mesh_task, tasks, cfg.threads))
    q = float(cfg.geo("quantile", 0.9))
    thr = float(cfg.geo("threshold", 1.0))
    zs = sorted(cfg.geo("zetas", [2, 3]))
    for n in cfg.n_list:
        for z1, z2 in itertools.combinations(zs, 2):
            d = _values(out.rows, f"absdiff_{z1}_{z2}", n)
            row = estimate_quantiles(d, [q], n, cfg.seed)[0]
            key = f"n={n},zeta={z1}vs{z2}"
            out.summary[key] = {"quantile": q, "value": row.value, "ci95": [row.ci_low, row.ci_high],
                                "replicas": int(d.size), "max": float(d.max())}
            out.check(f"q{q} |log R_{z1} - log R_{z2}| <= {thr} at n={n}", "statistical", row.value <= thr,
                      value=row.value, size=int(d.size))
            srt = np.sort(d)
            out.dat[f"absdiff_n{n}_{z1}_{z2}"] = ("absdiff ecdf",
                                                  np.column_stack([srt, np.arange(1, srt.size + 1) / srt.size]))
    return out


# ---------------------------------------------------------------- annulus-ratio


def _annulus_task(task):
    from ..resistance import around_resistance

    cfg, n, rep = task
    z = cfg.zeta(n)
    seed = replica_seed(cfg.seed, rep)
    r_in = float(cfg.geo("r_inner", 0.25))
    r_out = float(cfg.geo("r_outer", 0.5))
    s = 1.0 / (2**n * z)
    net = box_network(n, z, r_out + s, cfg.gamma, seed)
    view = annulus_views(net, (0.0, 0.0), r_in, r_out)
    across = solve_two_terminal(view.across, tol=cfg.tol).resistance
    around = around_resistance(view.around, cfg.tol)
    return [Row(n, z, rep, "across", across, seed), Row(n, z, rep, "around", around, seed),
            Row(n, z, rep, "log_ratio", math.log(around / across), seed)]


def annulus_ratio(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    tasks = [(cfg, n, r) for n in cfg.n_list for r in range(cfg.replicas)]
    _collect(out, _run_tasks(_annulus_task, tasks, cfg.threads))
    med = []
    for n in cfg.n_list:
        lr = _values(out.rows, "log_ratio", n)
        qs = estimate_quantiles(lr, [0.1, 0.5, 0.9], n, cfg.seed)
        out.summary[f"n={n}"] = {f"q{r.p}": r.value for r in qs} | {"replicas": int(lr.size)}
        med.append([n, qs[1].value])
    out.dat["median_log_ratio"] = ("n median_log(around/across)", np.array(med, float))
    return out


# ---------------------------------------------------------------- exit-time-scaling


def _exit_task(task):
    cfg, n, rep = task
    z = cfg.zeta(n)
    seed = replica_seed(cfg.seed, rep)
    net = box_network(n, z, float(cfg.geo("box", 1.0)), cfg.gamma, seed)
    dom = interior_mask(net)
    e = exact_exit_expectation(net, dom, net.nearest_vertex((0.0, 0.0)))
    return [Row(n, z, rep, "E_tau", e, seed),
            Row(n, z, rep, "log_E_tau_over_chi", math.log(e / chi(n, z, cfg.gamma)), seed)]


def exit_time_scaling(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    tasks = [(cfg, n, r) for n in cfg.n_list for r in range(cfg.replicas)]
    _collect(out, _run_tasks(_exit_task, tasks, cfg.threads))
    groups = [_values(out.rows, "log_E_tau_over_chi", n) for n in cfg.n_list]
    med = {n: float(np.median(g)) for n, g in zip(cfg.n_list, groups)}
    cis = {}
    for n, g in zip(cfg.n_list, groups):
        rng = bootstrap_stream(cfg.seed, n)
        b = np.median(g[rng.integers(0, g.size, (1000, g.size))], axis=1)
        cis[n] = [float(x) for x in np.quantile(b, [0.025, 0.975])]
    spread = max(med.values()) - min(med.values())
    slope = ols_slope_ci(cfg.n_list, groups, seed=cfg.seed) if len(groups) > 1 else (0.0, 0.0, 0.0)
    out.summary = {"median": med, "median_ci95": cis, "spread": spread,
                   "slope": {"estimate": slope[0], "ci95": [slope[1], slope[2]]},
                   "environments": cfg.replicas}
    limit = float(cfg.geo("max_spread", 1.5))
    out.check(f"median log(E tau / chi) varies by <= {limit}", "statistical", spread <= limit, spread=spread)
    out.dat["median"] = ("n median_log(Etau/chi)", np.array([[n, med[n]] for n in cfg.n_list], float))
    return out


# ---------------------------------------------------------------- lqg-moments


def _lqg_task(task):
    cfg, n, rep = task
    z = cfg.zeta(n)
    seed = replica_seed(cfg.seed, rep)
    grid = GridSpec.centered(n, float(cfg.geo("box", 0.25)), zeta=z)
    smp = sample_field(grid, seed=seed)
    eta = eta_measure(smp, cfg.gamma)
    net = build_network(smp, cfg.gamma)
    pi = pi_measure(net, np.nonzero(interior_mask(net))[0], cfg.gamma, n, z)
    return [Row(n, z, rep, "eta_normalized", eta.normalized, seed), Row(n, z, rep, "pi_raw", pi.raw, seed)]


def lqg_moments(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    tasks = [(cfg, n, r) for n in cfg.n_list for r in range(cfg.replicas)]
    _collect(out, _run_tasks(_lqg_task, tasks, cfg.threads))
    negp = float(cfg.geo("negative_p", 0.1))
    for n in cfg.n_list:
        x = _values(out.rows, "eta_normalized", n)
        mean = math.fsum(x) / x.size
        se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")
        pis = _values(out.rows, "pi_raw", n)
        pi_norm = pis / (math.fsum(pis) / pis.size)
        out.summary[f"n={n}"] = {
            "mean": mean, "se": se, "z": (mean - 1) / se if se > 0 else float("nan"),
            "second_moment": float(np.mean(x * x)), f"negative_moment_{negp}": float(np.mean(x ** -negp)),
            "pi_second_moment_empirical": float(np.mean(pi_norm ** 2)), "samples": int(x.size),
        }
        out.check(f"mean normalized eta within 4 SE of 1 at n={n}", "statistical", abs(mean - 1) <= 4 * se,
                  mean=mean, se=se, size=int(x.size))
    return out


# ---------------------------------------------------------------- identity-suite


def _brute_min_cut(edges, cap, A, Z, n_vertices):
    free = [v for v in range(n_vertices) if v not in set(A) | set(Z)]
    best = math.inf
    for mask in range(1 << len(free)):
        side = np.zeros(n_vertices, dtype=bool)
        side[list(A)] = True
        for i, v in enumerate(free):
            if mask >> i & 1:
                side[v] = True
        best = min(best, float(cap[side[edges[:, 0]] != side[edges[:, 1]]].sum()))
    return best


def identity_environment(n: int, zeta: int, gamma: float, seed: int, rng: np.random.Generator,
                         tol: float = 1e-10) -> dict:
    """Exact per-sample identities on one random rectangle; returns named errors and flags."""
    W, H = (int(v) for v in rng.integers(8, 13, size=2))
    grid = GridSpec.cells(n, W, H, zeta, origin=(-(W // 2), -(H // 2)))
    net = build_network(sample_field(grid, seed=seed), gamma)
    t = Terminals.of(net)
    res = solve_two_terminal(net, t, tol)
    out = {"W": W, "H": H, "R": res.resistance}
    out["rc_error"] = abs(res.resistance * res.conductance - 1.0)
    out["energy_error"] = abs(res.energy / res.resistance - 1.0)
    # Kirchhoff node law away from the terminals
    div = np.asarray(net.incidence().T @ res.current).ravel()
    free = np.ones(net.n_vertices, dtype=bool)
    free[t.A] = False
    free[t.Z] = False
    out["conservation"] = float(np.max(np.abs(div[free])))
    ohm = res.unit_potential[net.edges[:, 0]] - res.unit_potential[net.edges[:, 1]] - res.current * net.resistance
    out["ohm_error"] = float(np.max(np.abs(ohm)) / res.resistance)
    dual = solve_two_terminal(dual_network(net), tol=tol)
    out["duality_error"] = abs(res.resistance * dual.resistance - 1.0)
    pd = path_decomposition(net, res)
    out["path_energy_error"] = abs(pd.energy() / res.resistance - 1.0)
    out["path_weight_error"] = abs(math.fsum(pd.weights) - 1.0)
    out["path_load_error"] = float(np.max(np.abs(pd.edge_load(net.n_edges) - np.abs(res.current))))
    flow = max_flow_min_cut(net.edges, np.abs(res.current), t.A, t.Z, net.n_vertices)
    out["flow_cut_gap"] = abs(flow.value - flow.cut_capacity)
    # 2 x 2-cell corner: 12 edges, brute force over the free middle column
    sub_mask = np.all(net.lattice_index - net.lattice_index.min(axis=0) <= 2, axis=1)
    sub, _ = net.subnetwork(sub_mask)
    li = sub.lattice_index - sub.lattice_index.min(axis=0)
    A, Z = np.nonzero(li[:, 0] == 0)[0], np.nonzero(li[:, 0] == 2)[0]
    cap = sub.conductance
    fr = max_flow_min_cut(sub.edges, cap, A, Z, sub.n_vertices)
    out["brute_cut_gap"] = abs(fr.value - _brute_min_cut(sub.edges, cap, A.tolist(), Z.tolist(), sub.n_vertices))
    out["brute_edges"] = sub.n_edges
    # Rayleigh monotonicity
    e = int(rng.integers(net.n_edges))
    bumped = net.log_resistance.copy()
    bumped[e] += 1.0
    r2 = solve_two_terminal(net.with_log_resistance(bumped), t, tol).resistance
    out["rayleigh_ok"] = r2 >= res.resistance * (1 - 1e-12)
    # series law: two blocks sharing the middle column, plus the column itself
    li = net.lattice_index - net.lattice_index.min(axis=0)
    mid = W // 2
    left, lmap = net.subnetwork(li[:, 0] <= mid)
    right, rmap = net.subnetwork(li[:, 0] >= mid)
    rl = solve_two_terminal(left, Terminals(lmap[li[:, 0] == 0], lmap[li[:, 0] == mid]), tol).resistance
    rr = solve_two_terminal(right, Terminals(rmap[li[:, 0] == mid], rmap[li[:, 0] == W]), tol).resistance
    # the middle column (bottom to top) glues any pair of block crossings together
    col, cmap = net.subnetwork(li[:, 0] == mid)
    rc = solve_two_terminal(col, Terminals(cmap[(li[:, 0] == mid) & (li[:, 1] == 0)],
                                           cmap[(li[:, 0] == mid) & (li[:, 1] == H)]), tol).resistance
    out["series_ok"] = res.resistance <= (rl + rr + rc) * (1 + 1e-12)
    # parallel law with the source side split in two
    a_low = t.A[li[t.A, 1] < H // 2]
    a_high = t.A[li[t.A, 1] >= H // 2]
    c1 = solve_two_terminal(net, Terminals(a_low, t.Z), tol).conductance
    c2 = solve_two_terminal(net, Terminals(a_high, t.Z), tol).conductance
    out["parallel_ok"] = res.conductance <= (c1 + c2) * (1 + 1e-12)
    # Green symmetry on the interior
    V = np.nonzero(interior_mask(net))[0]
    x, y = (int(v) for v in rng.choice(V, size=2, replace=False))
    pi = net.vertex_mass()
    gxy = green_function(net, V, x, y, tol)
    gyx = green_function(net, V, y, x, tol)
    out["green_symmetry"] = abs(gxy / pi[y] - gyx / pi[x]) / max(abs(gxy / pi[y]), 1e-300)
    # edge-removal bound around the center
    view = annulus_views(net, (0.0, 0.0), 2 * net.spacing, 3 * net.spacing)
    hole = np.max(np.abs(net.lattice_index), axis=1) < 2
    D = np.nonzero(hole[net.edges[:, 0]] | hole[net.edges[:, 1]])[0]
    gap = resdif_gap(net, t, D, view.parent_edges, view.around, tol)
    out["resdif_margin"] = gap.rhs - gap.lhs
    return out


_IDENTITY_TOL = {
    "rc_error": 1e-9,
    "energy_error": 1e-9,
    "conservation": 1e-9,
    "ohm_error": 1e-8,
    "duality_error": 1e-8,
    "path_energy_error": 1e-6,
    "path_weight_error": 1e-12,
    "path_load_error": 1e-9,
    "flow_cut_gap": 1e-9,
    "brute_cut_gap": 1e-9,
    "green_symmetry": 1e-8,
}
_IDENTITY_FLAGS = ("rayleigh_ok", "series_ok", "parallel_ok")


def _identity_task(task):
    cfg, n, rep = task
    gammas = cfg.geo("gammas", [0.0, 0.2])
    gamma = float(gammas[rep % len(gammas)])
    z = cfg.zeta(n)
    seed = replica_seed(cfg.seed, rep)
    rng = _geo_rng(cfg.seed, rep, 1)
    res = identity_environment(n, z, gamma, seed, rng, cfg.tol)
    rows = [Row(n, z, rep, "gamma", gamma, seed)]
    for key, val in res.items():
        rows.append(Row(n, z, rep, key, float(val), seed))
    return rows


def identity_suite(cfg: ExperimentConfig) -> Outcome:
    """``replicas`` environments spread round-robin over ``n_list`` and the gamma list."""
    out = Outcome()
    tasks = [(cfg, cfg.n_list[r % len(cfg.n_list)], r) for r in range(cfg.replicas)]
    _collect(out, _run_tasks(_identity_task, tasks, cfg.threads))
    for key, tol in _IDENTITY_TOL.items():
        v = _values(out.rows, key)
        worst = float(v.max()) if v.size else float("nan")
        out.summary[key] = {"max": worst, "tol": tol}
        out.check(f"{key} <= {tol:g}", "hard", v.size > 0 and worst <= tol, max=worst, size=int(v.size))
    for key in _IDENTITY_FLAGS:
        v = _values(out.rows, key)
        out.check(key, "hard", v.size > 0 and bool(np.all(v == 1.0)), size=int(v.size))
    margin = _values(out.rows, "resdif_margin")
    out.check("resdif lhs <= rhs + 1e-8", "hard", margin.size > 0 and margin.min() >= -1e-8,
              min_margin=float(margin.min()) if margin.size else None)
    out.check("no solver failures", "hard", not out.failures, failures=len(out.failures))
    # Chebyshev-type spread bound on log R per (n, gamma) group
    p = 0.25
    gam = {(r.n, r.replica): r.value for r in out.rows if r.stat == "gamma"}
    groups: dict = {}
    for r in out.rows:
        if r.stat == "R":
            groups.setdefault((r.n, gam[(r.n, r.replica)]), []).append(math.log(r.value))
    for (n, g), logs in sorted(groups.items()):
        logs = np.asarray(logs)
        if logs.size < 8:
            continue
        q = np.quantile(logs, [p, 1 - p], method="inverted_cdf")
        rng = bootstrap_stream(cfg.seed, 30_000 + n)
        sds = np.std(logs[rng.integers(0, logs.size, (1000, logs.size))], axis=1)
        sd_hi = float(np.quantile(sds, 0.975))
        lhs = float(q[1] - q[0])
        rhs = math.sqrt(2) / p * sd_hi
        out.check(f"quantile spread bound n={n} gamma={g}", "statistical", lhs <= rhs,
                  log_ratio=lhs, bound=rhs, size=int(logs.size))
    return out


# ---------------------------------------------------------------- walk-consistency


def _walk_task(task):
    cfg, n, rep = task
    z = cfg.zeta(n)
    seed = replica_seed(cfg.seed, rep)
    cells = int(cfg.geo("cells", 8))
    samples = int(cfg.geo("samples", 100_000))
    grid = GridSpec.cells(n, cells, cells, z, origin=(-(cells // 2), -(cells // 2)))
    net = build_network(sample_field(grid, seed=seed), cfg.gamma)
    dom = interior_mask(net)
    v0 = net.nearest_vertex((0.0, 0.0))
    walker = Walker(net, dom)
    batch = walker.batch(v0, seed, samples)
    mean, se = batch.mean_steps()
    exact = exact_exit_expectation(net, dom, v0)
    rows = [Row(n, z, rep, "mean_steps", mean, seed), Row(n, z, rep, "mean_steps_se", se, seed),
            Row(n, z, rep, "exact_steps", exact, seed), Row(n, z, rep, "steps_z", (mean - exact) / se, seed)]
    law = harmonic_measure(net, dom, v0)
    verts, counts = np.unique(batch.exits, return_counts=True)
    emp = dict(zip(verts.tolist(), (counts / samples).tolist()))
    tv = 0.5 * sum(abs(emp.get(k, 0.0) - law.get(k, 0.0)) for k in set(emp) | set(law))
    rows.append(Row(n, z, rep, "tv", tv, seed))
    # exits through the left side versus the three-resistance formula
    li = net.lattice_index
    boundary = ~dom
    A = np.nonzero(boundary & (li[:, 0] == li[:, 0].min()))[0]
    Z = np.nonzero(boundary & (li[:, 0] != li[:, 0].min()))[0]
    ph = hitting_probability(net, v0, A, Z, cfg.tol)
    freq = float(np.isin(batch.exits, A).mean())
    hse = math.sqrt(max(ph * (1 - ph), 1e-300) / samples)
    rows += [Row(n, z, rep, "hit_exact", ph, seed), Row(n, z, rep, "hit_freq", freq, seed),
             Row(n, z, rep, "hit_z", (freq - ph) / hse, seed)]
    # Green-sum route for the exit expectation
    G, idx = green_matrix(net, dom)
    gsum = float(G[np.searchsorted(idx, v0)].sum())
    rows.append(Row(n, z, rep, "green_sum_error", abs(gsum / exact - 1.0), seed))
    # second moment: E tau^2 = 2 sum G(x,y) G(y,z) - E tau exactly, hence <= twice the double sum
    row = G[np.searchsorted(idx, v0)]
    double = float(row @ G.sum(axis=1))
    s = batch.steps.astype(float)
    m2 = float(np.mean(s * s))
    m2_se = float(np.std(s * s, ddof=1) / math.sqrt(s.size))
    rows.append(Row(n, z, rep, "second_moment_excess", (m2 - 2.0 * double) / m2_se, seed))
    rows.append(Row(n, z, rep, "second_moment_z", (m2 - (2.0 * double - exact)) / m2_se, seed))
    return rows


def _cmp_task(task):
    cfg, n, rep = task
    seed = replica_seed(cfg.seed, rep)
    a = float(cfg.geo("cmp_box", 0.25))
    paths = {}
    for m in (n, n + 1):
        z = cfg.zeta(m) if m in cfg.n_list else max(cfg.zeta(n), math.isqrt(m - 1) + 1)
        net = box_network(m, z, a, cfg.gamma, seed)
        rec = Walker(net, interior_mask(net)).run(net.nearest_vertex((0.0, 0.0)), WalkStream(seed, 0), True)
        paths[m] = rescaled_path(rec, net, m, z, cfg.gamma)
    d = cmp_distance(paths[n], paths[n + 1], int(cfg.geo("resolution", 512)))
    return [Row(n, cfg.zeta(n), rep, "cmp_next_scale", d, seed)]


def walk_consistency(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    tasks = [(cfg, cfg.n_list[r % len(cfg.n_list)], r) for r in range(cfg.replicas)]
    _collect(out, _run_tasks(_walk_task, tasks, cfg.threads))
    if cfg.geo("cmp", True):
        _collect(out, _run_tasks(_cmp_task, tasks, cfg.threads))
    tv_max = float(cfg.geo("tv_max", 0.02))
    for stat, lim, label in (("steps_z", 4.0, "mean exit steps within 4 SE of exact"),
                             ("hit_z", 4.0, "hitting frequency within 4 SE of the resistance formula")):
        v = np.abs(_values(out.rows, stat))
        out.check(label, "statistical", v.size > 0 and v.max() <= lim, max_abs_z=float(v.max()), size=int(v.size))
    tv = _values(out.rows, "tv")
    out.check(f"exit-measure TV <= {tv_max}", "statistical", tv.max() <= tv_max, max_tv=float(tv.max()))
    g = _values(out.rows, "green_sum_error")
    out.check("Green-sum equals exact exit expectation (1e-7)", "hard", g.max() <= 1e-7, max=float(g.max()))
    m2 = _values(out.rows, "second_moment_excess")
    out.check("E[tau^2] <= 2 x double Green sum + 4 SE", "statistical", m2.max() <= 4.0, max_z=float(m2.max()))
    m2z = np.abs(_values(out.rows, "second_moment_z"))
    out.check("E[tau^2] within 4 SE of 2 sum GG - E tau", "statistical", m2z.max() <= 4.0, max_abs_z=float(m2z.max()))
    out.summary = {
        "max_abs_steps_z": float(np.abs(_values(out.rows, "steps_z")).max()),
        "max_tv": float(tv.max()),
        "max_abs_hit_z": float(np.abs(_values(out.rows, "hit_z")).max()),
        "cmp_next_scale": {n: float(np.median(_values(out.rows, "cmp_next_scale", n)))
                           for n in cfg.n_list if _values(out.rows, "cmp_next_scale", n).size},
        "environments": cfg.replicas,
        "samples_per_environment": int(cfg.geo("samples", 100_000)),
    }
    out.check("no solver failures", "hard", not out.failures, failures=len(out.failures))
    return out


REGISTRY = {
    "duality-median": duality_median,
    "quantile-table": quantile_table,
    "mesh-compare": mesh_compare,
    "annulus-ratio": annulus_ratio,
    "exit-time-scaling": exit_time_scaling,
    "lqg-moments": lqg_moments,
    "identity-suite": identity_suite,
    "walk-consistency": walk_consistency,
}


def run_registered(cfg: ExperimentConfig) -> Outcome:
    return REGISTRY[cfg.experiment](cfg)
