"""Command-line entry point: ``gffnet <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..field import GridSpec, KernelSpec, save_sample, sample_field
from ..network import build_network, dual_network
from ..resistance import solve_two_terminal
from ..walk import Walker, WalkStream, write_trace
from .config import ConfigError, ExperimentConfig, load_config
from .runner import run_experiment

# subcommand -> registered experiment
EXPERIMENT_COMMANDS = {
    "duality-check": "duality-median",
    "quantiles": "quantile-table",
    "mesh-compare": "mesh-compare",
    "annulus-ratio": "annulus-ratio",
    "exit-time": "exit-time-scaling",
    "lqg-moments": "lqg-moments",
    "identity-suite": "identity-suite",
    "walk-consistency": "walk-consistency",
}


def _global_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="YAML key/value file")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--replicas", type=int)
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--tol", type=float, help="solver relative tolerance")
    p.add_argument("--threads", type=int, help="worker processes")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gffnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-field", help="draw one field sample and save it")
    _global_flags(p)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--zeta", type=int)
    p.add_argument("--box", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"), default=[-1, 1, -1, 1])
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--kernel", choices=["full", "truncated"], default="full")

    for name, help_ in (("resistance", "left-right resistance of one rectangle"),
                        ("walk-trace", "simulate one walk to the box boundary and write its trace")):
        p = sub.add_parser(name, help=help_)
        _global_flags(p)
        p.add_argument("--n", type=int, default=4)
        p.add_argument("--zeta", type=int)
        p.add_argument("--gamma", type=float, required=True)
        p.add_argument("--box", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"),
                       default=[-0.5, 0.5, -0.5, 0.5])
        if name == "resistance":
            p.add_argument("--dual", action="store_true", help="also solve the dual and report the product")

    for cmd, exp in EXPERIMENT_COMMANDS.items():
        p = sub.add_parser(cmd, help=f"run the {exp} experiment")
        _global_flags(p)
        p.add_argument("--gamma", type=float)
        p.add_argument("--n", type=int, nargs="+", dest="n_list")
    return parser


def _experiment_config(exp: str, args) -> ExperimentConfig:
    over = {"experiment": exp, "seed": args.seed, "replicas": args.replicas, "tol": args.tol,
            "threads": args.threads, "gamma": args.gamma, "n_list": args.n_list,
            "output_dir": str(args.out) if args.out else None}
    if args.config:
        return load_config(args.config, **over)
    data = {k: v for k, v in over.items() if v is not None}
    data.setdefault("output_dir", f"out/{exp}")
    return ExperimentConfig.from_mapping(data)


def _emit(args, payload: dict):
    text = json.dumps(payload, indent=2)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "report.json").write_text(text)
    print(text)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command in EXPERIMENT_COMMANDS:
            cfg = _experiment_config(EXPERIMENT_COMMANDS[args.command], args)
            report = run_experiment(cfg)
            for a in report.outcome.assertions:
                print(f"[{'PASS' if a.passed else 'FAIL'}] ({a.kind}) {a.name}")
            print(f"wrote {report.paths.get('json')}")
            return report.exit_status
        seed = args.seed or 0
        if args.command == "sample-field":
            grid = GridSpec.from_box(args.n, args.box, args.zeta)
            smp = sample_field(grid, KernelSpec(args.n, args.m, args.kernel), seed=seed)
            out = args.out or Path("out/sample-field")
            out.mkdir(parents=True, exist_ok=True)
            stem = out / f"field_n{args.n}_seed{seed}"
            save_sample(smp, stem)
            vals = smp.values
            _emit(args, {"stem": str(stem), "shape": list(vals.shape), "mean": float(vals.mean()),
                         "var": float(vals.var()), "grid": grid.to_dict()})
            return 0
        grid = GridSpec.from_box(args.n, args.box, args.zeta)
        net = build_network(sample_field(grid, seed=seed), args.gamma)
        if args.command == "resistance":
            res = solve_two_terminal(net, tol=args.tol or 1e-10)
            payload = {"R": res.resistance, "C": res.conductance, "energy": res.energy, **res.diagnostics(),
                       "vertices": net.n_vertices, "edges": net.n_edges}
            if args.dual:
                rd = solve_two_terminal(dual_network(net), tol=args.tol or 1e-10).resistance
                payload.update({"R_dual": rd, "product": res.resistance * rd})
            _emit(args, payload)
            return 0
        # walk-trace: interior of the box is the domain
        li = net.lattice_index
        dom = np.all((li > li.min(axis=0)) & (li < li.max(axis=0)), axis=1)
        center = ((args.box[0] + args.box[1]) / 2, (args.box[2] + args.box[3]) / 2)
        rec = Walker(net, dom).run(net.nearest_vertex(center), WalkStream(seed, 0), keep_trace=True)
        out = args.out or Path("out/walk-trace")
        out.mkdir(parents=True, exist_ok=True)
        path = write_trace(rec, net, out / "trace.txt")
        print(json.dumps({"trace": str(path), "steps": rec.steps, "exit_vertex": rec.exit_vertex}, indent=2))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
