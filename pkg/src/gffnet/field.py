"""White-noise approximation of the planar GFF on a refined lattice.

The field ``phi_{m,n}`` is a sum of independent dyadic layers ``k = m+1..n``;
layer ``k`` is a stationary Gaussian field with covariance

    C_k(r) = pi * int_{4^-k}^{4^-(k-1)} p_t(r) dt,    p_t(r) = exp(-r^2/2t) / (2 pi t).

Layers are synthesized by exact spectral synthesis on a continuous torus that
contains the box plus a padding of ``8 * 2^-(k-1)``.  The torus covariance is the
periodization of ``C_k`` (Poisson summation), so covariances between in-box
points are exact up to the wrap-around term, which is below 1e-15.  Because the
random mode coefficients depend only on the box and the layer, the same seed
gives the same continuum field on every mesh inside that box.

The finite-range field ``psi_{m,n}`` replaces the heat kernel with a truncated
kernel of support radius ``2 sigma_t`` and is realized as an explicit
convolution of lattice white noise, eight log-uniform time slices per layer.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import special
from scipy.signal import fftconvolve

__all__ = [
    "GridSpec",
    "KernelSpec",
    "FieldSample",
    "FieldError",
    "SynthesisResourceError",
    "analytic_covariance",
    "truncated_covariance",
    "sample_field",
    "oscillation",
    "save_sample",
    "load_sample",
    "EPS0",
]

EPS0 = 0.01
FORMAT_VERSION = 1
SLICES_PER_LAYER = 8
# dropped spectral variance per layer is E1(MODE_CUTOFF) / 2 < 5e-15
MODE_CUTOFF = 30.0
DEFAULT_MEMORY_BUDGET = 2 * 1024**3
_LAYER_TAG = 0x6C61796572  # "layer"
_SLICE_TAG = 0x736C696365  # "slice"


class FieldError(ValueError):
    """Invalid field request (scale range, geometry, region)."""


class SynthesisResourceError(MemoryError):
    """The requested synthesis exceeds the memory budget."""

    def __init__(self, required_bytes: int, budget: int):
        self.required_bytes = int(required_bytes)
        self.budget = int(budget)
        super().__init__(
            f"field synthesis needs ~{self.required_bytes / 2**20:.1f} MiB, "
            f"budget is {self.budget / 2**20:.1f} MiB"
        )


def _as_lattice_index(value: float, spacing: Fraction) -> int:
    q = Fraction(value).limit_denominator(1 << 40) / spacing
    k = round(q)
    if abs(float(q) - k) > 1e-9:
        raise FieldError(f"coordinate {value!r} is not a multiple of the lattice spacing {float(spacing)!r}")
    return int(k)


@dataclass(frozen=True)
class GridSpec:
    """Rectangle of the rescaled lattice ``2^-n zeta^-1 Z^2`` and its refinement.

    ``index_box`` holds the corner indices ``(i0, i1, j0, j1)`` in units of the
    lattice spacing, so the rectangle is ``[i0 s, i1 s] x [j0 s, j1 s]``.
    The sampled (refined) lattice has spacing ``s / 2`` and contains every
    vertex and every edge midpoint of the rectangle.
    """

    n: int
    zeta: int
    index_box: tuple[int, int, int, int]

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise FieldError("scale exponent n must be an integer >= 1")
        if int(self.zeta) != self.zeta or self.zeta < 1:
            raise FieldError("mesh multiplier zeta must be an integer >= 1")
        i0, i1, j0, j1 = (int(v) for v in self.index_box)
        if i1 < i0 or j1 < j0:
            raise FieldError("empty box")
        object.__setattr__(self, "index_box", (i0, i1, j0, j1))

    @staticmethod
    def default_zeta(n: int) -> int:
        return math.isqrt(n - 1) + 1

    @classmethod
    def from_box(cls, n: int, box, zeta: int | None = None) -> "GridSpec":
        """Grid for ``box = (xmin, xmax, ymin, ymax)``; corners must lie on the lattice."""
        zeta = cls.default_zeta(n) if zeta is None else int(zeta)
        spacing = Fraction(1, (2**n) * zeta)
        idx = tuple(_as_lattice_index(v, spacing) for v in box)
        return cls(n, zeta, idx)

    @classmethod
    def centered(cls, n: int, a: float, b: float | None = None, zeta: int | None = None) -> "GridSpec":
        """Grid for ``B(a, b) = [-a, a] x [-b, b]``."""
        b = a if b is None else b
        return cls.from_box(n, (-a, a, -b, b), zeta)

    @classmethod
    def cells(cls, n: int, width: int, height: int, zeta: int | None = None,
              origin: tuple[int, int] = (0, 0)) -> "GridSpec":
        """Rectangle of ``width x height`` lattice cells with lower-left corner index ``origin``."""
        zeta = cls.default_zeta(n) if zeta is None else int(zeta)
        i0, j0 = origin
        return cls(n, zeta, (i0, i0 + width, j0, j0 + height))

    @property
    def spacing(self) -> float:
        return 1.0 / ((2**self.n) * self.zeta)

    @property
    def refined_spacing(self) -> float:
        return 0.5 * self.spacing

    @property
    def box(self) -> tuple[float, float, float, float]:
        s = self.spacing
        i0, i1, j0, j1 = self.index_box
        return (i0 * s, i1 * s, j0 * s, j1 * s)

    @property
    def cell_shape(self) -> tuple[int, int]:
        """``(width, height)`` in lattice cells."""
        i0, i1, j0, j1 = self.index_box
        return (i1 - i0, j1 - j0)

    @property
    def refined_shape(self) -> tuple[int, int]:
        """Array shape ``(rows, cols)`` of the refined lattice, rows along y."""
        w, h = self.cell_shape
        return (2 * h + 1, 2 * w + 1)

    def refined_axes(self) -> tuple[np.ndarray, np.ndarray]:
        i0, _, j0, _ = self.index_box
        rows, cols = self.refined_shape
        hr = self.refined_spacing
        xs = (2 * i0 + np.arange(cols)) * hr
        ys = (2 * j0 + np.arange(rows)) * hr
        return xs, ys

    def contains(self, region) -> bool:
        x0, x1, y0, y1 = self.box
        tol = 1e-12
        return (region[0] >= x0 - tol and region[1] <= x1 + tol
                and region[2] >= y0 - tol and region[3] <= y1 + tol)

    def to_dict(self) -> dict:
        return {"n": self.n, "zeta": self.zeta, "index_box": list(self.index_box),
                "box": list(self.box), "spacing": self.spacing}


@dataclass(frozen=True)
class KernelSpec:
    """Which approximation and which band of scales to synthesize.

    ``kind`` is ``"full"`` (heat kernel, field phi) or ``"truncated"`` (field psi).
    """

    n: int
    m: int = 0
    kind: str = "full"
    eps0: float = EPS0

    def __post_init__(self):
        if self.kind not in ("full", "truncated"):
            raise FieldError(f"unknown kernel kind {self.kind!r}")
        if not (0 <= self.m < self.n):
            raise FieldError(f"invalid scale range (m, n) = ({self.m}, {self.n}); need 0 <= m < n")

    @property
    def layers(self) -> range:
        return range(self.m + 1, self.n + 1)

    def support_radius(self, t: float) -> float:
        """Support radius ``2 sigma_t`` of the truncated kernel at time ``t``."""
        return 2.0 * sigma(t, self.eps0)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "m": self.m, "n": self.n, "eps0": self.eps0}


def sigma(t: float, eps0: float = EPS0) -> float:
    return eps0 * math.sqrt(t) * abs(math.log(t)) ** eps0


@dataclass(frozen=True, eq=False)
class FieldSample:
    """A realization on the refined lattice of ``grid``.

    ``values[r, c]`` is the field at ``(x0 + c * s/2, y0 + r * s/2)``.
    """

    grid: GridSpec
    kernel: KernelSpec
    values: np.ndarray
    seed: int | None
    negated: bool = False
    layer_count: int = field(init=False)

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.shape != self.grid.refined_shape:
            raise FieldError(f"values shape {vals.shape} != refined lattice shape {self.grid.refined_shape}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "layer_count", self.kernel.n - self.kernel.m)

    @classmethod
    def from_values(cls, grid: GridSpec, values, kernel: KernelSpec | None = None) -> "FieldSample":
        """Wrap an explicit array (synthetic fields, tests, loaded data)."""
        kernel = KernelSpec(n=grid.n) if kernel is None else kernel
        return cls(grid, kernel, np.asarray(values, dtype=np.float64), seed=None)

    @property
    def vertex_values(self) -> np.ndarray:
        """Field at the lattice vertices, shape ``(height+1, width+1)``."""
        return self.values[::2, ::2]

    @property
    def horizontal_midpoint_values(self) -> np.ndarray:
        """Field at midpoints of horizontal edges, shape ``(height+1, width)``."""
        return self.values[::2, 1::2]

    @property
    def vertical_midpoint_values(self) -> np.ndarray:
        """Field at midpoints of vertical edges, shape ``(height, width+1)``."""
        return self.values[1::2, ::2]

    def at(self, points) -> np.ndarray:
        """Look up values at refined-lattice points given in coordinates."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        hr = self.grid.refined_spacing
        i0, _, j0, _ = self.grid.index_box
        cols = np.rint(pts[:, 0] / hr).astype(np.int64) - 2 * i0
        rows = np.rint(pts[:, 1] / hr).astype(np.int64) - 2 * j0
        off = np.abs(pts[:, 0] / hr - np.rint(pts[:, 0] / hr)) + np.abs(pts[:, 1] / hr - np.rint(pts[:, 1] / hr))
        nr, nc = self.values.shape
        if np.any(off > 1e-6) or np.any((cols < 0) | (cols >= nc) | (rows < 0) | (rows >= nr)):
            raise FieldError("point is not on the sampled lattice of this box")
        return self.values[rows, cols]

    def negate(self) -> "FieldSample":
        return FieldSample(self.grid, self.kernel, -self.values, self.seed, not self.negated)

    def __add__(self, other: "FieldSample") -> "FieldSample":
        if other.grid != self.grid:
            raise FieldError("cannot add samples on different grids")
        k = self.kernel
        if k.kind == other.kernel.kind and k.n == other.kernel.m:
            kernel = KernelSpec(n=other.kernel.n, m=k.m, kind=k.kind, eps0=k.eps0)
        elif k.kind == other.kernel.kind and other.kernel.n == k.m:
            kernel = KernelSpec(n=k.n, m=other.kernel.m, kind=k.kind, eps0=k.eps0)
        else:
            kernel = k
        seed = self.seed if self.seed == other.seed else None
        return FieldSample(self.grid, kernel, self.values + other.values, seed, self.negated)


def analytic_covariance(x, y, m: int, n: int) -> float:
    """Exact ``E[phi_{m,n}(x) phi_{m,n}(y)]``.

    Uses ``int_{r^2/2 d_m^2}^{r^2/2 d_n^2} e^{-s} / (2 s) ds`` with ``d_k = 2^-k``,
    evaluated as a difference of exponential integrals.
    """
    if not (0 <= m < n):
        raise FieldError(f"invalid scale range (m, n) = ({m}, {n}); need 0 <= m < n")
    r2 = float(np.sum((np.asarray(x, float) - np.asarray(y, float)) ** 2))
    if r2 == 0.0:
        return (n - m) * math.log(2.0)
    lo = r2 * 4.0**m / 2.0
    hi = r2 * 4.0**n / 2.0
    if lo > 700.0:
        return 0.0
    return 0.5 * (special.exp1(lo) - special.exp1(hi))


def _layer_spectrum(xi2: np.ndarray, k: int) -> np.ndarray:
    """Fourier transform of the layer-k covariance at squared wavenumber ``xi2``."""
    a = 4.0 ** (-k)
    b = 4.0 ** (-(k - 1))
    out = np.empty_like(xi2)
    small = xi2 * b < 1e-8
    big = ~small
    out[small] = math.pi * (b - a) * (1.0 - 0.25 * xi2[small] * (a + b))
    z = xi2[big]
    # 2 pi / |xi|^2 * (exp(-a z/2) - exp(-b z/2)), written to avoid cancellation
    out[big] = 2.0 * math.pi / z * np.exp(-0.5 * a * z) * (-np.expm1(-0.5 * (b - a) * z))
    return out


def layer_padding(k: int) -> float:
    return 8.0 * 2.0 ** (-(k - 1))


@lru_cache(maxsize=64)
def _layer_basis(grid: GridSpec, k: int):
    """Mode amplitudes and evaluation matrices for layer ``k`` on ``grid``.

    Depends on the box and the layer only through the mode set; the evaluation
    matrices additionally depend on the mesh.
    """
    x0, x1, y0, y1 = grid.box
    pad = layer_padding(k)
    lx = (x1 - x0) + pad
    ly = (y1 - y0) + pad
    a = 4.0 ** (-k)
    kmax = math.sqrt(2.0 * MODE_CUTOFF / a)
    mx = int(math.floor(kmax * lx / (2 * math.pi)))
    my = int(math.floor(kmax * ly / (2 * math.pi)))
    kx = 2 * math.pi / lx * np.arange(-mx, mx + 1)
    ky = 2 * math.pi / ly * np.arange(-my, my + 1)
    xi2 = kx[:, None] ** 2 + ky[None, :] ** 2
    amp = np.sqrt(_layer_spectrum(xi2, k) / (lx * ly))
    amp[xi2 > kmax**2] = 0.0
    xs, ys = grid.refined_axes()
    ex = np.exp(1j * np.outer(kx, xs - x0))
    ey = np.exp(1j * np.outer(ky, ys - y0))
    return amp, ex, ey


def _layer_rng(seed: int, k: int, tag: int = _LAYER_TAG, sub: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(tag, k, sub))
    return np.random.Generator(np.random.PCG64(ss))


def _full_layer(grid: GridSpec, k: int, seed: int) -> np.ndarray:
    amp, ex, ey = _layer_basis(grid, k)
    rng = _layer_rng(seed, k)
    z = rng.standard_normal((2,) + amp.shape)
    coef = amp * (z[0] + 1j * z[1])
    # values[row=y, col=x] = Re sum_{p,q} coef[p,q] ex[p,col] ey[q,row]
    return ((ey.T @ coef.T) @ ex).real


def _bump(r: np.ndarray) -> np.ndarray:
    """Smooth radial cutoff: 1 on ``r < 1``, 0 on ``r >= 2``."""
    def g(u):
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(-1.0 / u[pos])
        return out
    up = g(2.0 - r)
    down = g(r - 1.0)
    den = up + down
    out = np.zeros_like(r)
    nz = den > 0
    out[nz] = up[nz] / den[nz]
    return out


def _slice_times(k: int, q: int = SLICES_PER_LAYER):
    a = 4.0 ** (-k)
    b = 4.0 ** (-(k - 1))
    edges = a * (b / a) ** (np.arange(q + 1) / q)
    mids = np.sqrt(edges[:-1] * edges[1:])
    return mids, np.diff(edges)


def _truncated_kernel(t_half: float, h: float, eps0: float) -> np.ndarray:
    """Truncated heat kernel ``p_s(d) Phi(|d| / sigma_s)`` on lattice offsets, ``s = t_half``."""
    sig = sigma(t_half, eps0)
    radius = 2.0 * sig
    rpix = int(math.floor(radius / h))
    d = np.arange(-rpix, rpix + 1) * h
    r = np.hypot(d[:, None], d[None, :])
    kern = np.exp(-(r**2) / (2 * t_half)) / (2 * math.pi * t_half)
    if sig > 0:
        kern = kern * _bump(r / sig)
    else:
        kern = np.zeros_like(kern)
    return kern


def _truncated_layer(grid: GridSpec, k: int, seed: int, eps0: float) -> np.ndarray:
    rows, cols = grid.refined_shape
    h = grid.refined_spacing
    out = np.zeros((rows, cols))
    mids, widths = _slice_times(k)
    for j, (tm, dt) in enumerate(zip(mids, widths)):
        kern = _truncated_kernel(0.5 * tm, h, eps0)
        rpix = kern.shape[0] // 2
        rng = _layer_rng(seed, k, _SLICE_TAG, j)
        noise = rng.standard_normal((rows + 2 * rpix, cols + 2 * rpix))
        scale = math.sqrt(math.pi * dt) * h
        if rpix == 0:
            out += scale * kern[0, 0] * noise
        else:
            out += scale * fftconvolve(noise, kern, mode="valid")
    return out


def truncated_covariance(x, y, kernel: KernelSpec, refined_spacing: float) -> float:
    """Exact covariance of the discrete truncated-kernel construction.

    Computed by direct summation over the lattice white noise, independently of
    the convolution used for synthesis.  ``x`` and ``y`` are refined-lattice
    points (coordinates).
    """
    if kernel.kind != "truncated":
        raise FieldError("truncated_covariance needs a truncated kernel")
    h = refined_spacing
    dx = int(round((x[0] - y[0]) / h))
    dy = int(round((x[1] - y[1]) / h))
    total = 0.0
    for k in kernel.layers:
        mids, widths = _slice_times(k)
        for tm, dt in zip(mids, widths):
            kern = _truncated_kernel(0.5 * tm, h, kernel.eps0)
            rp = kern.shape[0] // 2
            acc = 0.0
            for a in range(-rp, rp + 1):
                for b in range(-rp, rp + 1):
                    a2, b2 = a - dx, b - dy
                    if -rp <= a2 <= rp and -rp <= b2 <= rp:
                        acc += kern[a + rp, b + rp] * kern[a2 + rp, b2 + rp]
            total += math.pi * dt * h * h * acc
    return total


def _estimate_bytes(grid: GridSpec, kernel: KernelSpec) -> int:
    rows, cols = grid.refined_shape
    base = 8 * rows * cols * 3
    if kernel.kind == "truncated":
        return base + 8 * rows * cols * 4
    worst = 0
    x0, x1, y0, y1 = grid.box
    for k in kernel.layers:
        pad = layer_padding(k)
        kmax = math.sqrt(2.0 * MODE_CUTOFF * 4.0**k)
        mx = 2 * int(kmax * ((x1 - x0) + pad) / (2 * math.pi)) + 1
        my = 2 * int(kmax * ((y1 - y0) + pad) / (2 * math.pi)) + 1
        worst = max(worst, 16 * (mx * cols + my * rows + mx * my * 2 + cols * my + rows * cols))
    return base + worst


def sample_field(grid: GridSpec, kernel: KernelSpec | None = None, seed: int = 0,
                 negate: bool = False, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> FieldSample:
    """Synthesize ``phi_{m,n}`` (or ``psi_{m,n}``) on the refined lattice of ``grid``.

    Parameters
    ----------
    grid : GridSpec
        Lattice rectangle to sample.
    kernel : KernelSpec, optional
        Scale band and kernel kind; defaults to the full kernel with
        ``(m, n) = (0, grid.n)``.
    seed : int
        64-bit master seed.  Layer ``k`` draws from a stream keyed on
        ``(seed, k)``, so samples of adjacent bands with the same seed add up to
        the sample of the union band.
    negate : bool
        Return the pointwise negation.

    Returns
    -------
    FieldSample

    Raises
    ------
    SynthesisResourceError
        The estimated working memory exceeds ``memory_budget``.
    """
    kernel = KernelSpec(n=grid.n) if kernel is None else kernel
    need = _estimate_bytes(grid, kernel)
    if need > memory_budget:
        raise SynthesisResourceError(need, memory_budget)
    rows, cols = grid.refined_shape
    values = np.zeros((rows, cols))
    for k in kernel.layers:
        if kernel.kind == "full":
            values += _full_layer(grid, k, seed)
        else:
            values += _truncated_layer(grid, k, seed, kernel.eps0)
    if negate:
        values = -values
    return FieldSample(grid, kernel, values, int(seed), bool(negate))


def oscillation(sample: FieldSample, eps: float, region=None) -> float:
    """Largest ``|f(x) - f(y)|`` over refined-lattice pairs in ``region`` with ``|x - y| <= eps``."""
    grid = sample.grid
    h = grid.refined_spacing
    if eps < h * (1 - 1e-12):
        raise FieldError("eps must be at least the lattice spacing")
    region = grid.box if region is None else tuple(region)
    if not grid.contains(region):
        raise FieldError("region is not inside the sample box")
    xs, ys = grid.refined_axes()
    cs = np.nonzero((xs >= region[0] - 1e-12) & (xs <= region[1] + 1e-12))[0]
    rs = np.nonzero((ys >= region[2] - 1e-12) & (ys <= region[3] + 1e-12))[0]
    f = sample.values[rs[0]:rs[-1] + 1, cs[0]:cs[-1] + 1]
    nr, nc = f.shape
    rmax = int(math.floor(eps / h + 1e-9))
    best = 0.0
    for di in range(0, min(rmax, nc - 1) + 1):
        for dj in range(-min(rmax, nr - 1), min(rmax, nr - 1) + 1):
            if di == 0 and dj <= 0:
                continue
            if (di * di + dj * dj) * h * h > eps * eps * (1 + 1e-12):
                continue
            a = f[max(0, -dj):nr - max(0, dj), 0:nc - di]
            b = f[max(0, dj):nr + min(0, dj), di:nc]
            if a.size:
                best = max(best, float(np.max(np.abs(b - a))))
    return best


def save_sample(sample: FieldSample, stem) -> tuple[Path, Path]:
    """Write ``<stem>.json`` metadata and ``<stem>.f64`` little-endian row-major values."""
    stem = Path(stem)
    meta = {
        "format_version": FORMAT_VERSION,
        "grid": sample.grid.to_dict(),
        "kernel": sample.kernel.to_dict(),
        "seed": sample.seed,
        "negated": sample.negated,
        "layer_count": sample.layer_count,
        "shape": list(sample.values.shape),
        "dtype": "<f8",
        "order": "row-major, rows along y",
    }
    meta_path = stem.with_suffix(".json")
    data_path = stem.with_suffix(".f64")
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    sample.values.astype("<f8").tofile(data_path)
    return meta_path, data_path


def load_sample(stem) -> FieldSample:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    if meta.get("format_version") != FORMAT_VERSION:
        raise FieldError(f"unsupported field format version {meta.get('format_version')!r}")
    g = meta["grid"]
    grid = GridSpec(g["n"], g["zeta"], tuple(g["index_box"]))
    kd = meta["kernel"]
    kernel = KernelSpec(n=kd["n"], m=kd["m"], kind=kd["kind"], eps0=kd["eps0"])
    values = np.fromfile(stem.with_suffix(".f64"), dtype="<f8").reshape(meta["shape"])
    return FieldSample(grid, kernel, values, meta["seed"], meta["negated"])
