import math

import numpy as np
import pytest

from gffnet.field import (
    FieldError,
    FieldSample,
    GridSpec,
    KernelSpec,
    SynthesisResourceError,
    _bump,
    _layer_basis,
    _slice_times,
    _truncated_kernel,
    analytic_covariance,
    load_sample,
    oscillation,
    sample_field,
    save_sample,
    sigma,
    truncated_covariance,
)
from oracles import COV_0_4_HALF, covariance_quad


# ---------------------------------------------------------------- grid


def test_grid_spacing_and_shapes():
    g = GridSpec.centered(1, 1.0, zeta=1)
    assert g.spacing == 0.5
    assert g.refined_spacing == 0.25
    assert g.cell_shape == (4, 4)
    assert g.refined_shape == (9, 9)
    xs, ys = g.refined_axes()
    assert xs[0] == -1 and xs[-1] == 1 and ys.size == 9


def test_default_zeta_is_ceil_sqrt():
    for n in range(1, 40):
        assert GridSpec.default_zeta(n) == math.ceil(math.sqrt(n))


def test_box_must_lie_on_lattice():
    with pytest.raises(FieldError):
        GridSpec.from_box(2, (0, 0.3, 0, 1), zeta=1)


def test_invalid_scales():
    with pytest.raises(FieldError):
        GridSpec(0, 1, (0, 1, 0, 1))
    with pytest.raises(FieldError):
        KernelSpec(n=3, m=3)
    with pytest.raises(FieldError):
        KernelSpec(n=3, kind="bogus")


# ---------------------------------------------------------------- analytic covariance


def test_variance_is_layer_count_log2():
    assert analytic_covariance((0, 0), (0, 0), 0, 3) == 3 * math.log(2)
    assert math.isclose(analytic_covariance((0, 0), (0, 0), 0, 3), 2.079442, rel_tol=1e-6)


def test_covariance_matches_frozen_quadrature():
    assert abs(analytic_covariance((0, 0), (0.5, 0), 0, 4) - COV_0_4_HALF) <= 1e-10 * COV_0_4_HALF


@pytest.mark.parametrize("r,m,n", [(0.01, 0, 3), (0.1, 1, 5), (0.3, 0, 2), (1.0, 0, 6), (2.0, 0, 1)])
def test_covariance_matches_mpmath(r, m, n):
    ref = covariance_quad(r, m, n)
    assert abs(analytic_covariance((0, 0), (r, 0), m, n) - ref) <= 1e-10 * max(ref, 1e-300)


def test_covariance_vanishes_far_away():
    assert analytic_covariance((0, 0), (100.0, 0), 0, 1) == 0.0


def test_covariance_scaling_relation():
    # phi_{ra,rb}(r .) has the law of phi_{a,b}: shifting both scales by one halves distances
    for m, n, d in [(0, 3, 0.4), (1, 4, 0.05), (2, 6, 0.3)]:
        a = analytic_covariance((0, 0), (d, 0), m, n)
        b = analytic_covariance((0, 0), (d / 2, 0), m + 1, n + 1)
        assert abs(a - b) <= 1e-10 * a


def test_invalid_range():
    with pytest.raises(FieldError):
        analytic_covariance((0, 0), (0, 0), 2, 2)


# ---------------------------------------------------------------- synthesis


def test_spectral_mode_sum_is_exact_variance():
    # the variance of a synthesized layer is the sum of its mode powers
    g = GridSpec.centered(4, 0.5, zeta=1)
    tot = sum(float(np.sum(_layer_basis(g, k)[0] ** 2)) for k in range(1, 5))
    assert abs(tot - 4 * math.log(2)) < 1e-9


def test_spectral_mode_sum_is_exact_covariance():
    g = GridSpec.centered(4, 0.5, zeta=1)
    d = 0.5
    tot = 0.0
    for k in range(1, 5):
        amp, ex, _ = _layer_basis(g, k)
        lx = (g.box[1] - g.box[0]) + 8.0 * 2.0 ** (-(k - 1))
        mx = (amp.shape[0] - 1) // 2
        kx = 2 * math.pi / lx * np.arange(-mx, mx + 1)
        tot += float(np.sum(amp**2 * np.cos(kx * d)[:, None]))
    assert abs(tot - COV_0_4_HALF) < 1e-9


def test_determinism():
    g = GridSpec.centered(3, 0.5)
    a = sample_field(g, seed=11)
    b = sample_field(g, seed=11)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, sample_field(g, seed=12).values)


def test_layer_additivity():
    g = GridSpec.centered(4, 0.5)
    lo = sample_field(g, KernelSpec(n=2, m=0), seed=5)
    hi = sample_field(g, KernelSpec(n=4, m=2), seed=5)
    full = sample_field(g, KernelSpec(n=4, m=0), seed=5)
    assert np.max(np.abs(lo.values + hi.values - full.values)) <= 1e-12
    s = lo + hi
    assert s.kernel.m == 0 and s.kernel.n == 4


def test_coupling_across_mesh():
    # same seed and box: a finer mesh sees the same continuum field at shared points
    coarse = sample_field(GridSpec.centered(3, 1.0, zeta=2), seed=9)
    fine = sample_field(GridSpec.centered(3, 1.0, zeta=4), seed=9)
    assert np.max(np.abs(fine.values[::2, ::2] - coarse.values)) < 1e-10


def test_negation_exact():
    g = GridSpec.centered(3, 0.5)
    a = sample_field(g, seed=3)
    b = sample_field(g, seed=3, negate=True)
    assert np.array_equal(-a.values, b.values)
    assert b.negated and np.array_equal(a.negate().values, b.values)


def test_lookup_at_vertices_and_midpoints():
    g = GridSpec.centered(2, 0.5, zeta=1)
    s = sample_field(g, seed=1)
    assert s.at([(0.25, 0.0)])[0] == s.vertex_values[2, 3]
    assert s.at([(0.125, 0.0)])[0] == s.horizontal_midpoint_values[2, 2]
    assert s.at([(0.0, 0.125)])[0] == s.vertical_midpoint_values[2, 2]
    with pytest.raises(FieldError):
        s.at([(0.01, 0.0)])
    with pytest.raises(FieldError):
        s.at([(2.0, 0.0)])


def test_memory_budget():
    with pytest.raises(SynthesisResourceError) as err:
        sample_field(GridSpec.centered(6, 1.0), memory_budget=1000)
    assert err.value.required_bytes > 1000


@pytest.mark.slow
def test_center_variance_statistical():
    g = GridSpec.centered(3, 0.125, zeta=1)
    v = np.array([sample_field(g, seed=s).values[2, 2] for s in range(10_000)])
    target = 3 * math.log(2)
    se = target * math.sqrt(2 / (v.size - 1))
    assert abs(v.var() - target) <= 4 * se


# ---------------------------------------------------------------- truncated kernel


def test_support_radius():
    k = KernelSpec(n=3, kind="truncated")
    t = 0.01
    assert k.support_radius(t) == 2 * 0.01 * math.sqrt(t) * abs(math.log(t)) ** 0.01
    assert sigma(t) == 0.01 * math.sqrt(t) * abs(math.log(t)) ** 0.01


def test_bump_profile():
    r = np.array([0.0, 0.5, 0.999, 1.0, 1.5, 2.0, 3.0])
    b = _bump(r)
    assert np.all(b[:4] == 1.0) and np.all(b[5:] == 0.0) and 0 < b[4] < 1


def test_truncated_kernel_vanishes_beyond_support():
    h = 1.0 / 512
    for k in range(1, 8):
        for tm in _slice_times(k)[0]:
            kern = _truncated_kernel(0.5 * tm, h, 0.01)
            rp = kern.shape[0] // 2
            d = np.arange(-rp, rp + 1) * h
            r = np.hypot(d[:, None], d[None, :])
            assert np.all(kern[r >= 2 * sigma(0.5 * tm)] == 0.0)


def test_truncated_finite_range():
    k = KernelSpec(n=8, kind="truncated")
    h = 1.0 / 1024
    reach = 2 * max(2 * sigma(0.5 * t) for j in k.layers for t in _slice_times(j)[0])
    steps = int(math.ceil(reach / h)) + 1
    assert truncated_covariance((0, 0), (steps * h, 0), k, h) == 0.0
    assert truncated_covariance((0, 0), (0, 0), k, h) > 0


def test_truncated_sample_variance_matches_oracle():
    k = KernelSpec(n=3, kind="truncated")
    g = GridSpec.centered(3, 0.25, zeta=1)
    target = truncated_covariance((0, 0), (0, 0), k, g.refined_spacing)
    v = np.array([sample_field(g, k, seed=s).values[4, 4] for s in range(2000)])
    assert abs(v.var() - target) <= 4 * target * math.sqrt(2 / 1999)


# ---------------------------------------------------------------- oscillation


def test_oscillation_constant_is_zero():
    g = GridSpec.centered(2, 0.5, zeta=1)
    s = FieldSample.from_values(g, np.full(g.refined_shape, 3.0))
    assert oscillation(s, 0.3) == 0.0


def test_oscillation_linear_field():
    g = GridSpec.centered(3, 1.0, zeta=1)
    xs, ys = g.refined_axes()
    gx, gy = 0.6, -0.8
    vals = gx * xs[None, :] + gy * ys[:, None]
    s = FieldSample.from_values(g, vals)
    eps = 0.3
    osc = oscillation(s, eps)
    assert osc <= 1.0 * eps + 1e-12
    assert osc >= 1.0 * eps - g.refined_spacing


def test_oscillation_monotone_and_region():
    g = GridSpec.centered(3, 0.5)
    s = sample_field(g, seed=2)
    assert oscillation(s, 0.05) <= oscillation(s, 0.1) <= oscillation(s, 0.2)
    assert oscillation(s, 0.1, (-0.25, 0.25, -0.25, 0.25)) <= oscillation(s, 0.1)
    with pytest.raises(FieldError):
        oscillation(s, 0.1, (-2, 2, -2, 2))
    with pytest.raises(FieldError):
        oscillation(s, 1e-6)


# ---------------------------------------------------------------- persistence


def test_save_load_roundtrip(tmp_path):
    g = GridSpec.centered(3, 0.5)
    s = sample_field(g, seed=4, negate=True)
    meta, data = save_sample(s, tmp_path / "phi")
    assert data.stat().st_size == 8 * s.values.size
    raw = np.fromfile(data, dtype="<f8").reshape(s.values.shape)
    assert np.array_equal(raw, s.values)
    back = load_sample(tmp_path / "phi")
    assert np.array_equal(back.values, s.values)
    assert back.grid == g and back.seed == 4 and back.negated and back.layer_count == 3



@pytest.mark.slow
def test_disjoint_ranges_uncorrelated_and_stationary():
    g = GridSpec.centered(4, 0.25, zeta=1)
    pts = np.array([(0, 0), (0.125, 0), (-0.25, 0), (-0.125, 0), (0.0625, -0.125), (0.25, 0.25)])
    N = 10_000
    lo = np.empty((N, pts.shape[0]))
    hi = np.empty((N, pts.shape[0]))
    for s in range(N):
        lo[s] = sample_field(g, KernelSpec(2, 0), seed=s).at(pts)
        hi[s] = sample_field(g, KernelSpec(4, 2), seed=s).at(pts)
    # five probe pairs: the (0,2) and (2,4) components are independent
    for i, j in [(0, 0), (0, 1), (2, 3), (4, 5), (1, 4)]:
        prod = lo[:, i] * hi[:, j]
        assert abs(prod.mean()) <= 4 * prod.std(ddof=1) / math.sqrt(N)
    # stationarity: displacement (1/8, 0) from two base points
    full = lo + hi
    a = full[:, 0] * full[:, 1]
    b = full[:, 2] * full[:, 3]
    se = math.hypot(a.std(ddof=1), b.std(ddof=1)) / math.sqrt(N)
    assert abs(a.mean() - b.mean()) <= 4 * se
