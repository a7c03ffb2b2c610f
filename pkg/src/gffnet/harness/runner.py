"""Run a registered experiment and write its report files."""
from __future__ import annotations

import csv
import json
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .experiments import Outcome, run_registered

__all__ = ["ExperimentReport", "run_experiment", "write_dat", "CSV_COLUMNS"]

CSV_COLUMNS = ["experiment", "n", "zeta", "gamma", "replica", "stat", "value", "seed"]


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    outcome: Outcome
    paths: dict

    @property
    def hard_ok(self) -> bool:
        return all(a.passed for a in self.outcome.assertions if a.kind == "hard")

    @property
    def all_ok(self) -> bool:
        return all(a.passed for a in self.outcome.assertions)

    @property
    def exit_status(self) -> int:
        return 0 if self.hard_ok else 1


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _environment() -> dict:
    import numba
    import scipy

    return {"python": sys.version.split()[0], "platform": platform.platform(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def write_dat(path, header: str, data) -> Path:
    """Two-column whitespace table with a ``#`` header line."""
    path = Path(path)
    np.savetxt(path, np.asarray(data, dtype=float), fmt="%.17g", header=header)
    return path


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Run ``cfg.experiment``; writes ``report.json``, ``detail.csv`` and ``*.dat`` under ``cfg.output_dir``.

    Rows are sorted by ``(n, replica, stat)`` so the CSV body does not depend on
    the order in which replicas finished.
    """
    outcome = run_registered(cfg)
    outcome.rows.sort(key=lambda r: (r.n, r.replica, r.stat, r.zeta))
    paths = {}
    if write:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "detail.csv"
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in outcome.rows:
                w.writerow([cfg.experiment, r.n, r.zeta, repr(cfg.gamma), r.replica, r.stat, repr(float(r.value)),
                            r.seed])
        paths["csv"] = str(csv_path)
        for name, (header, data) in outcome.dat.items():
            paths[name] = str(write_dat(out / f"{name}.dat", header, data))
        report = {
            "experiment": cfg.experiment,
            "config": cfg.to_dict(),
            "summary": outcome.summary,
            "assertions": [{"name": a.name, "kind": a.kind, "passed": a.passed, "detail": a.detail}
                           for a in outcome.assertions],
            "failures": outcome.failures,
            "status": "pass" if all(a.passed for a in outcome.assertions if a.kind == "hard") else "fail",
            "environment": _environment(),
        }
        json_path = out / "report.json"
        json_path.write_text(json.dumps(_jsonable(report), indent=2, allow_nan=True))
        paths["json"] = str(json_path)
    return ExperimentReport(cfg, outcome, paths)
