import json

import numpy as np
import pytest

from gffnet.harness import cli
from gffnet.harness.config import ConfigError, ExperimentConfig, load_config
from gffnet.harness.experiments import identity_environment, self_dual_resistance
from gffnet.harness.runner import CSV_COLUMNS, run_experiment
from gffnet.harness.stats import (
    QuantileTable,
    binomial_ci,
    estimate_quantiles,
    ols_slope_ci,
    replica_seed,
)
from oracles import sorted_quantile


# ---------------------------------------------------------------- statistics


def test_quantile_lower_order_statistic():
    assert estimate_quantiles([1, 2, 3, 4], [0.5])[0].value == 2.0
    assert estimate_quantiles([4, 3, 1, 2], [0.25, 0.75])[1].value == 3.0


def test_quantile_monotone_and_sort_oracle():
    x = np.random.default_rng(0).lognormal(size=301)
    ps = [0.05, 0.25, 0.5, 0.75, 0.95]
    rows = estimate_quantiles(x, ps, seed=1)
    vals = [r.value for r in rows]
    assert vals == sorted(vals)
    for r in rows:
        assert r.value == sorted_quantile(x, r.p)
        assert r.ci_low <= r.value <= r.ci_high


def test_quantile_validation():
    with pytest.raises(ValueError):
        estimate_quantiles([], [0.5])
    with pytest.raises(ValueError):
        estimate_quantiles([1.0], [1.0])


def test_bootstrap_is_seeded():
    x = np.arange(50.0)
    assert estimate_quantiles(x, [0.3], seed=4) == estimate_quantiles(x, [0.3], seed=4)


def test_lambda_on_self_dual_samples():
    samples = [self_dual_resistance(4, 2, 8, 0.2, replica_seed(5, r)) for r in range(200)]
    t = QuantileTable()
    t.add(4, samples, [0.25, 0.75], seed=5)
    ref = sorted_quantile(samples, 0.75) / sorted_quantile(samples, 0.25)
    assert t.lambda_hat(4, 0.25) == ref
    lo, hi = t.rows[(4, 0.75)].ci_low / t.rows[(4, 0.25)].ci_high, t.rows[(4, 0.75)].ci_high / t.rows[(4, 0.25)].ci_low
    assert lo <= ref <= hi


def test_slope_helpers():
    rng = np.random.default_rng(2)
    groups = [rng.normal(2 * x, 0.1, 200) for x in range(4)]
    s, lo, hi = ols_slope_ci(np.arange(4), groups)
    assert lo <= 2 <= hi and abs(s - 2) < 0.05
    lo, hi = binomial_ci(50, 100)
    assert lo < 0.5 < hi and abs((lo + hi) / 2 - 0.5) < 1e-12


def test_replica_seed_independent_of_order():
    assert replica_seed(1, 2) == replica_seed(1, 2)
    assert len({replica_seed(1, r) for r in range(100)}) == 100


# ---------------------------------------------------------------- config


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig("identity-suite", replicas=0)
    with pytest.raises(ConfigError):
        ExperimentConfig("nope")
    with pytest.raises(ConfigError):
        ExperimentConfig("duality-median")
    with pytest.raises(ConfigError):
        ExperimentConfig("identity-suite", zeta_rule=1, n_list=[4])
    assert ExperimentConfig("identity-suite", zeta_rule=1, n_list=[4], allow_small_zeta=True).zeta(4) == 1
    with pytest.raises(ConfigError):
        ExperimentConfig("annulus-ratio", geometry={"r_inner": -1})
    with pytest.warns(UserWarning):
        ExperimentConfig("identity-suite", gamma=0.8)
    assert ExperimentConfig("identity-suite").gamma == 0.2


def test_load_config_yaml(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("experiment: annulus-ratio\nreplicas: 3\nr_inner: 0.125\nn_list: [2, 3]\n")
    cfg = load_config(p, seed=9, replicas=None)
    assert cfg.replicas == 3 and cfg.seed == 9 and cfg.geometry == {"r_inner": 0.125}
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(p)


# ---------------------------------------------------------------- runs


def test_identity_environment_passes():
    rng = np.random.default_rng(0)
    checks = identity_environment(3, 2, 0.2, replica_seed(0, 0), rng)
    assert all(v for k, v in checks.items() if k.endswith("_ok"))


def _csv_body(path):
    return open(path).read().splitlines()[1:]


def test_identity_suite_status_and_determinism(tmp_path):
    cfg = dict(experiment="identity-suite", replicas=6, n_list=[2, 3], seed=3)
    a = run_experiment(ExperimentConfig(**cfg, output_dir=str(tmp_path / "a")))
    b = run_experiment(ExperimentConfig(**cfg, output_dir=str(tmp_path / "b")))
    assert a.exit_status == 0 and a.hard_ok
    assert open(a.paths["csv"]).readline().strip().split(",") == CSV_COLUMNS
    assert _csv_body(a.paths["csv"]) == _csv_body(b.paths["csv"])
    rep = json.loads(open(a.paths["json"]).read())
    assert rep["status"] == "pass" and rep["experiment"] == "identity-suite"


def test_threads_do_not_change_rows(tmp_path):
    cfg = dict(experiment="annulus-ratio", replicas=4, n_list=[2], seed=1)
    a = run_experiment(ExperimentConfig(**cfg, output_dir=str(tmp_path / "a")))
    b = run_experiment(ExperimentConfig(**cfg, threads=2, output_dir=str(tmp_path / "b")))
    assert _csv_body(a.paths["csv"]) == _csv_body(b.paths["csv"])


@pytest.mark.parametrize("exp,extra", [
    ("duality-median", {"gamma": 0.2, "geometry": {"k": 4}}),
    ("quantile-table", {"gamma": 0.2}),
    ("mesh-compare", {}),
    ("exit-time-scaling", {"geometry": {"box": 0.5}}),
    ("lqg-moments", {}),
    ("walk-consistency", {"geometry": {"samples": 2000, "cells": 6}}),
])
def test_every_experiment_runs(tmp_path, exp, extra):
    cfg = ExperimentConfig(exp, replicas=4, n_list=[2, 3], seed=0, output_dir=str(tmp_path), **extra)
    rep = run_experiment(cfg)
    assert rep.outcome.rows and rep.outcome.assertions
    assert (tmp_path / "report.json").exists() and (tmp_path / "detail.csv").exists()


# ---------------------------------------------------------------- cli


def test_cli_field_resistance_trace(tmp_path, capsys):
    assert cli.main(["sample-field", "--n", "2", "--box", "-0.5", "0.5", "-0.5", "0.5", "--out", str(tmp_path / "f")]) == 0
    assert list((tmp_path / "f").glob("*.bin")) or list((tmp_path / "f").iterdir())
    assert cli.main(["resistance", "--n", "3", "--gamma", "0.2", "--dual", "--out", str(tmp_path / "r")]) == 0
    rep = json.loads((tmp_path / "r" / "report.json").read_text())
    assert abs(rep["product"] - 1) < 1e-8
    assert cli.main(["walk-trace", "--n", "2", "--gamma", "0.2", "--out", str(tmp_path / "w")]) == 0
    assert (tmp_path / "w" / "trace.txt").exists()


def test_cli_experiment_and_config_error(tmp_path, capsys):
    code = cli.main(["identity-suite", "--replicas", "2", "--n", "2", "--out", str(tmp_path)])
    assert code == 0
    assert "[PASS]" in capsys.readouterr().out
    assert cli.main(["identity-suite", "--replicas", "0", "--out", str(tmp_path)]) == 2
    assert cli.main(["quantiles", "--replicas", "2", "--out", str(tmp_path)]) == 2
