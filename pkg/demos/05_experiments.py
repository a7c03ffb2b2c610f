"""
Running registered experiments
==============================

Every experiment is a seeded, reproducible procedure that writes a JSON
summary, per-replica CSV rows and small data tables.  The same runs are
available from the command line, e.g.

    python -m gffnet identity-suite --replicas 20 --out out/identity
"""
import json

from gffnet.harness import ExperimentConfig, run_experiment

##############################################################################
# Exact identities on a handful of environments.
rep = run_experiment(ExperimentConfig("identity-suite", replicas=12, n_list=[2, 3], output_dir="out/demo-identity"))
for a in rep.outcome.assertions:
    print("[%s] %s" % ("PASS" if a.passed else "FAIL", a.name))

##############################################################################
# Tightness proxy: per-scale quantile ratio of the crossing resistance.
rep = run_experiment(ExperimentConfig("quantile-table", gamma=0.2, replicas=100, n_list=[2, 3, 4],
                                      output_dir="out/demo-quantiles"))
print(json.dumps(rep.outcome.summary["lambda_hat"], indent=1))
print("files:", ", ".join(sorted(rep.paths)))
