"""Quantiles, bootstrap intervals and small statistical helpers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "QuantileRow",
    "QuantileTable",
    "estimate_quantiles",
    "bootstrap_stream",
    "binomial_ci",
    "ols_slope_ci",
    "replica_seed",
]

N_BOOT = 1000
_BOOT_TAG = 0xB007


def replica_seed(seed: int, replica: int) -> int:
    """64-bit seed for one replica, independent of execution order."""
    return int(np.random.SeedSequence([seed, replica]).generate_state(1, np.uint64)[0])


def bootstrap_stream(seed: int, tag: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(_BOOT_TAG, tag))))


def _quantile(x: np.ndarray, p) -> np.ndarray:
    # inf{x : F(x) >= p}, taken along the last axis
    return np.quantile(x, p, axis=-1, method="inverted_cdf")


@dataclass(frozen=True)
class QuantileRow:
    n: int
    p: float
    value: float
    ci_low: float
    ci_high: float
    size: int


def estimate_quantiles(samples, p_list, n: int = 0, seed: int = 0, n_boot: int = N_BOOT) -> list[QuantileRow]:
    """Order-statistic quantiles ``inf{x : F(x) >= p}`` with percentile bootstrap CIs.

    Examples
    --------
    >>> estimate_quantiles([1, 2, 3, 4], [0.5])[0].value
    2.0
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no samples")
    p = np.asarray(p_list, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("probabilities must lie in (0, 1)")
    est = _quantile(x, p)
    rng = bootstrap_stream(seed, n)
    boot = x[rng.integers(0, x.size, size=(n_boot, x.size))]
    bq = _quantile(boot, p)  # (len(p), n_boot)
    lo, hi = np.quantile(bq, [0.025, 0.975], axis=-1)
    return [QuantileRow(n, float(pi), float(e), float(a), float(b), x.size)
            for pi, e, a, b in zip(p, est, lo, hi)]


@dataclass
class QuantileTable:
    """Quantiles of crossing resistance per scale, with the ratio ``Lambda``."""

    rows: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)

    def add(self, n: int, samples, p_list, seed: int = 0):
        self.samples[n] = np.asarray(samples, dtype=float)
        for r in estimate_quantiles(samples, p_list, n, seed):
            self.rows[(n, r.p)] = r

    def value(self, n: int, p: float) -> float:
        return self.rows[(n, p)].value

    def ratio(self, n: int, p: float) -> float:
        """Per-scale spread ``l(1-p) / l(p)``."""
        return self.value(n, 1 - p) / self.value(n, p)

    def lambda_hat(self, n: int, p: float) -> float:
        """``max_{m <= n} l^{(m)}(1-p) / l^{(m)}(p)`` over the tabulated scales."""
        return max(self.ratio(m, p) for m in sorted(self.samples) if m <= n)

    def ratio_slope(self, p: float, seed: int = 0, n_boot: int = N_BOOT):
        """OLS slope of the per-scale ratio against ``n`` with a bootstrap 95% CI."""
        ns = np.array(sorted(self.samples), dtype=float)
        point = np.polyfit(ns, [self.ratio(int(m), p) for m in ns], 1)[0]
        rng = bootstrap_stream(seed, 10_000)
        slopes = np.empty(n_boot)
        boots = {}
        for m in ns:
            x = self.samples[int(m)]
            b = x[rng.integers(0, x.size, size=(n_boot, x.size))]
            boots[m] = _quantile(b, [1 - p, p])
        for i in range(n_boot):
            y = [boots[m][0, i] / boots[m][1, i] for m in ns]
            slopes[i] = np.polyfit(ns, y, 1)[0]
        lo, hi = np.quantile(slopes, [0.025, 0.975])
        return float(point), float(lo), float(hi)


def binomial_ci(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval."""
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return float(mid - half), float(mid + half)


def ols_slope_ci(x, groups: list, stat=np.median, seed: int = 0, n_boot: int = N_BOOT):
    """Slope of ``stat(group)`` against ``x`` with a bootstrap CI (groups resampled independently)."""
    x = np.asarray(x, dtype=float)
    point = np.polyfit(x, [stat(g) for g in groups], 1)[0]
    rng = bootstrap_stream(seed, 20_000)
    slopes = np.empty(n_boot)
    for i in range(n_boot):
        y = [stat(g[rng.integers(0, len(g), len(g))]) for g in groups]
        slopes[i] = np.polyfit(x, y, 1)[0]
    lo, hi = np.quantile(slopes, [0.025, 0.975])
    return float(point), float(lo), float(hi)
