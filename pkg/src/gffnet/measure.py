"""LQG-type vertex measures built from a field sample or a network."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import FieldSample
from .network import LOG_GUARD, Network, NetworkError

__all__ = ["MeasureReport", "eta_measure", "pi_measure", "normalize_empirical", "expected_eta"]


@dataclass(frozen=True)
class MeasureReport:
    """Raw measure of a vertex set and its normalized value.

    ``empirical`` marks a normalization by a replica mean rather than a closed form.
    """

    raw: float
    normalized: float
    box_size: int
    gamma: float
    n: int
    zeta: int
    empirical: bool = False


def expected_eta(gamma: float, n: int, box_size: int) -> float:
    """``E[eta_n(B)] = 2^{gamma^2 n / 2} |B|``."""
    return 2.0 ** (0.5 * gamma * gamma * n) * box_size


def _fsum_exp(x: np.ndarray) -> float:
    return math.fsum(np.exp(x).tolist())


def eta_measure(sample: FieldSample, gamma: float, B=None) -> MeasureReport:
    """``eta_n(B) = sum_{y in B} exp(gamma * phi_n(y))`` over lattice vertices.

    Parameters
    ----------
    sample : FieldSample
    gamma : float
    B : (k, 2) array of vertex coordinates, or None for every vertex of the box.
    """
    if B is None:
        vals = sample.vertex_values.ravel()
    else:
        vals = sample.at(np.asarray(B, dtype=float).reshape(-1, 2))
    if vals.size == 0:
        raise NetworkError("empty vertex set")
    x = gamma * vals
    if np.max(np.abs(x)) >= LOG_GUARD:
        raise NetworkError("gamma * field exceeds the overflow guard")
    raw = _fsum_exp(x)
    g = sample.grid
    return MeasureReport(raw, raw / expected_eta(gamma, g.n, vals.size), int(vals.size), gamma, g.n, g.zeta)


def pi_measure(net: Network, B=None, gamma: float = float("nan"), n: int = 0, zeta: int = 0) -> MeasureReport:
    """``pi_n(B) = sum_{y in B} sum_{e ~ y} c_e`` for vertex ids ``B`` (all vertices if None).

    There is no closed-form mean, so ``normalized`` is left as NaN; see
    :func:`normalize_empirical`.
    """
    if B is None:
        B = np.arange(net.n_vertices)
    B = np.unique(np.asarray(B, dtype=np.int64))
    inB = np.zeros(net.n_vertices, dtype=bool)
    inB[B] = True
    # each edge counts once per endpoint in B
    mult = inB[net.edges[:, 0]].astype(np.int64) + inB[net.edges[:, 1]]
    sel = mult > 0
    terms = np.repeat(-net.log_resistance[sel], mult[sel])
    raw = _fsum_exp(terms)
    return MeasureReport(raw, float("nan"), int(B.size), gamma, n, zeta, True)


def normalize_empirical(reports: list[MeasureReport]) -> list[MeasureReport]:
    """Divide each raw value by the replica mean; flags the result as empirical."""
    if not reports:
        return []
    mean = math.fsum(r.raw for r in reports) / len(reports)
    return [MeasureReport(r.raw, r.raw / mean, r.box_size, r.gamma, r.n, r.zeta, True) for r in reports]
