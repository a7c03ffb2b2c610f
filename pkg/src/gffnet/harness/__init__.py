"""Seeded experiment runner, quantile statistics and the command-line interface."""
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config
from .runner import ExperimentReport, run_experiment
from .stats import QuantileRow, QuantileTable, estimate_quantiles

__all__ = ["EXPERIMENTS", "ConfigError", "ExperimentConfig", "load_config", "ExperimentReport",
           "run_experiment", "QuantileRow", "QuantileTable", "estimate_quantiles"]
