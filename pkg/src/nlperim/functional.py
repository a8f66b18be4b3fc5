"""Energy evaluators: seminorms, perimeters, interaction energies, curvature.

The discrete seminorm of a grid function u is the double sum

    sum_{x,y} |u(x) - u(y)|^p K(x-y) h^(2d),

grouped shell-wise by the lattice shift j = (y-x)/h, so that each shift
contributes U_j * kappa_j * h^d exactly once.  Grid functions are treated as
piecewise constant on cells; for singular power-law kernels the shift weight
kappa_j can be replaced by the exact cell-pair integral (a tent average),
which removes the systematic near-field error of the midpoint rule.

Summation order is fixed (shell-major, then lexicographic), so results are
bit-reproducible regardless of worker count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, signal

from .grid import Grid, GridFunction, GridSet, shift_array
from .kernels import Kernel
from .quadrature import annulus_mass, kernel_integral


# --------------------------------------------------------------------------
# Schemes and reports
# --------------------------------------------------------------------------

_NEAR_MODES = ("exclude-diagonal-cell", "analytic-fractional-correction")


@dataclass(frozen=True)
class QuadratureScheme:
    """How the singular near field and the far field are handled.

    near_field "analytic-fractional-correction" replaces midpoint weights by
    exact cell-pair integrals where the kernel is a known power law (all
    shifts inside the power-law region in 1D, the first ``near_shells``
    shells elsewhere); kernels the correction cannot handle fall back to
    plain diagonal exclusion.  The diagonal shift is always excluded:
    cellwise-constant functions contribute nothing there.  ``cutoff_radius``
    truncates the shift enumeration (None: the grid span);
    ``tail_compensation`` adds the analytic far-field term for whole-space
    energies.
    """

    near_field: str = "analytic-fractional-correction"
    near_shells: int = 3
    cutoff_radius: Optional[float] = None
    tail_compensation: bool = True
    summation_order: str = "shell-lex"

    def __post_init__(self):
        if self.near_field not in _NEAR_MODES:
            raise ValueError(f"near_field must be one of {_NEAR_MODES}")

    def to_dict(self) -> dict:
        return {"near_field": self.near_field, "near_shells": self.near_shells,
                "cutoff_radius": self.cutoff_radius,
                "tail_compensation": self.tail_compensation,
                "summation_order": self.summation_order}


DEFAULT_SCHEME = QuadratureScheme()
EXCLUDE_ONLY = QuadratureScheme(near_field="exclude-diagonal-cell")


@dataclass
class EnergyReport:
    value: float
    error: float
    near_share: float = 0.0
    tail_share: float = 0.0
    method: str = "shellsum"
    scheme: Optional[QuadratureScheme] = None
    notes: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def enc(v):
            return "inf" if isinstance(v, float) and math.isinf(v) else v
        payload = {"value": enc(self.value), "error": enc(self.error),
                   "near_share": enc(self.near_share), "tail_share": enc(self.tail_share),
                   "method": self.method,
                   "scheme": self.scheme.to_dict() if self.scheme else None,
                   "notes": {k: enc(v) for k, v in self.notes.items()}}
        return json.dumps(payload, sort_keys=True)


# --------------------------------------------------------------------------
# Shift enumeration and weights
# --------------------------------------------------------------------------

def _enumerate_offsets(dim: int, span: tuple, radius_cells2: float | None = None) -> np.ndarray:
    """All nonzero integer shifts within the per-axis span, shell-major order.

    radius_cells2 optionally restricts to |j|_2^2 <= radius_cells2.
    """
    axes = [np.arange(-(span[a] - 1), span[a]) for a in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    offs = np.stack([m.ravel() for m in mesh], axis=-1)
    r2 = np.sum(offs.astype(float) ** 2, axis=-1)
    keep = r2 > 0
    if radius_cells2 is not None:
        keep &= r2 <= radius_cells2
    offs, r2 = offs[keep], r2[keep]
    keys = tuple(offs[:, a] for a in reversed(range(dim))) + (r2,)
    return offs[np.lexsort(keys)]


def _tent_weights_powerlaw_1d(amp: float, sigma: float, ks: np.ndarray, h: float) -> np.ndarray:
    """Exact cell-pair weights for K(z) = amp*|z|^(-1-sigma), offsets ks >= 1.

    kappa_k = (1/h^2) * int (h - |z - k h|)_+ * K(z) dz, the exact average of
    K over the two interacting cells.  Requires sigma < 1 (the adjacent-cell
    integral diverges otherwise).
    """
    ks = np.asarray(ks, dtype=float)
    a, m, b = (ks - 1.0) * h, ks * h, (ks + 1.0) * h

    def A(z):
        return -(z ** (-sigma)) / sigma

    def B(z):
        return z ** (1.0 - sigma) / (1.0 - sigma)

    safe_a = np.where(a > 0, a, 1.0)
    i1 = np.where(a > 0, (B(m) - B(safe_a)) - a * (A(m) - A(safe_a)), B(m))
    i2 = b * (A(b) - A(m)) - (B(b) - B(m))
    return amp * (i1 + i2) / (h * h)


def _tent_weight_quad_1d(kernel: Kernel, k: int, h: float) -> float:
    """Numeric cell-pair weight in 1D: quadrature of the tent average."""
    a, m, b = (k - 1.0) * h, k * h, (k + 1.0) * h

    def f(z):
        return (h - abs(z - m)) * float(kernel(np.array([[z]]))[0])

    val1, e1 = integrate.quad(f, max(a, 1e-300), m, limit=100)
    val2, e2 = integrate.quad(f, m, b, limit=100)
    return (val1 + val2) / (h * h)


def _tent_weight_numeric(kernel: Kernel, j: np.ndarray, h: float, n: int) -> float:
    """Midpoint tent average of K over the cell pair at offset j (d >= 2)."""
    d = kernel.dim
    axes = [(j[a] - 1.0) * h + (np.arange(n) + 0.5) * (2.0 * h / n) for a in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    w = np.ones(len(pts))
    for a in range(d):
        w *= np.maximum(0.0, h - np.abs(pts[:, a] - j[a] * h))
    vals = kernel(pts)
    finite = np.isfinite(vals)
    cell = (2.0 * h / n) ** d
    return float(np.sum(vals[finite] * w[finite]) * cell) / h ** (2 * d)


def _offset_weights(kernel: Kernel, h: float, offsets: np.ndarray,
                    scheme: QuadratureScheme):
    """Per-shift weights kappa_j, corrected mask, and per-shift weight errors."""
    dim = kernel.dim
    kappa = kernel(offsets.astype(float) * h)
    kappa = np.where(np.isfinite(kappa), kappa, 0.0)
    corrected = np.zeros(len(offsets), dtype=bool)
    kerr = np.zeros(len(offsets))
    if scheme.near_field != "analytic-fractional-correction" or not kernel.is_singular:
        return kappa, corrected, kerr
    if dim == 1:
        ks = np.abs(offsets[:, 0])
        if kernel.near_power is not None:
            amp, sigma, rad = kernel.near_power
            if sigma >= 1.0:
                return kappa, corrected, kerr
            sel = (ks + 1) * h <= rad
            if np.any(sel):
                kappa[sel] = _tent_weights_powerlaw_1d(amp, sigma, ks[sel], h)
                corrected |= sel
            sel2 = ~sel & (ks <= scheme.near_shells)
        else:
            sel2 = ks <= scheme.near_shells
        for i in np.flatnonzero(sel2):
            new = _tent_weight_quad_1d(kernel, int(ks[i]), h)
            if math.isfinite(new):
                kerr[i] = 1e-9 * abs(new)
                kappa[i] = new
                corrected[i] = True
        return kappa, corrected, kerr
    linf = np.max(np.abs(offsets), axis=-1)
    for i in np.flatnonzero(linf <= scheme.near_shells):
        coarse = _tent_weight_numeric(kernel, offsets[i], h, 17)
        fine = _tent_weight_numeric(kernel, offsets[i], h, 33)
        kappa[i] = fine
        kerr[i] = abs(fine - coarse)
        corrected[i] = True
    return kappa, corrected, kerr


def kappa_table(kernel: Kernel, grid: Grid, scheme: QuadratureScheme = DEFAULT_SCHEME) -> np.ndarray:
    """Corrected shift weights as an array over all grid offsets.

    Entry [j + (shape - 1)] holds kappa_j * h^(2d); the diagonal offset is
    zero (cellwise-constant functions contribute nothing there).
    """
    offsets = _enumerate_offsets(grid.dim, tuple(grid.shape))
    kappa, _, _ = _offset_weights(kernel, grid.h, offsets, scheme)
    shape = tuple(2 * n - 1 for n in grid.shape)
    table = np.zeros(shape)
    idx = tuple(offsets[:, a] + grid.shape[a] - 1 for a in range(grid.dim))
    table[idx] = kappa * grid.cell_volume ** 2
    return table


# --------------------------------------------------------------------------
# Seminorm
# --------------------------------------------------------------------------

def _window_sum(power_vals: np.ndarray, j) -> float:
    """Sum of power_vals over cells y with y - j inside the array bounds."""
    sl = []
    for a, s in enumerate(j):
        n = power_vals.shape[a]
        s = int(s)
        if abs(s) >= n:
            return 0.0
        sl.append(slice(s, n) if s >= 0 else slice(0, n + s))
    return float(np.sum(power_vals[tuple(sl)]))


def seminorm(u: GridFunction, kernel: Kernel, p: float = 1.0,
             region: Optional[GridSet] = None,
             scheme: QuadratureScheme = DEFAULT_SCHEME) -> EnergyReport:
    """Discrete seminorm double sum  sum |u(x)-u(y)|^p K(x-y) h^(2d).

    ``region=None`` means the whole space: u is extended by zero outside the
    grid box, shift sums beyond the enumerated radius contribute exactly
    2*||u||_p^p each, and that far field is folded into a kernel tail mass
    obtained by quadrature (the ``tail_share``).  With a GridSet region,
    interactions are restricted to region x region and the sum is exact.

    The reported value is the double sum itself, i.e. the p-th power of the
    seminorm.
    """
    if p < 1:
        raise ValueError("exponent p must satisfy p >= 1")
    grid = u.grid
    if kernel.dim != grid.dim:
        raise ValueError("kernel dimension does not match grid")
    if region is not None and not (region.grid is grid or region.grid.compatible(grid)):
        raise ValueError("function and region live on different grids")
    h = grid.h
    hd = grid.cell_volume
    vals = u.values

    if region is not None:
        maskf = region.cells.astype(float)
        offsets = _enumerate_offsets(grid.dim, tuple(grid.shape))
        kappa, corrected, kerr = _offset_weights(kernel, h, offsets, scheme)
        total = 0.0
        near_share = 0.0
        err = 0.0
        for i in np.flatnonzero(kappa > 0):
            j = offsets[i]
            sv = shift_array(vals, j)
            sm = shift_array(maskf, j)
            uj = float(np.sum(np.abs(sv - vals) ** p * maskf * sm)) * hd
            contrib = uj * kappa[i] * hd
            total += contrib
            err += kerr[i] * uj * hd
            if corrected[i]:
                near_share += contrib
        return EnergyReport(value=total, error=err, near_share=near_share,
                            tail_share=0.0, method="shellsum", scheme=scheme,
                            notes={"p": p, "region": "gridset"})

    # whole-space mode with zero extension
    power = np.abs(vals) ** p
    total_power = float(np.sum(power))
    norm_p = total_power * hd                     # ||u||_p^p
    if total_power == 0.0:
        return EnergyReport(value=0.0, error=0.0, method="shellsum", scheme=scheme,
                            notes={"p": p, "region": "whole-space"})
    span = tuple(grid.shape)
    diam_cells = math.sqrt(sum(float(n) ** 2 for n in span))
    cut_cells = (scheme.cutoff_radius / h) if scheme.cutoff_radius is not None else diam_cells + 1.0
    supp = vals != 0.0
    ext = []
    for a in range(grid.dim):
        axes = tuple(b for b in range(grid.dim) if b != a)
        proj = supp.any(axis=axes) if axes else supp
        idx = np.flatnonzero(proj)
        ext.append(int(idx[-1] - idx[0] + 1))
    offsets = _enumerate_offsets(grid.dim, tuple(int(cut_cells) + 1 for _ in span),
                                 cut_cells ** 2)
    kappa, corrected, kerr = _offset_weights(kernel, h, offsets, scheme)
    total = 0.0
    near_share = 0.0
    err = 0.0
    for i in np.flatnonzero(kappa > 0):
        j = offsets[i]
        if any(abs(int(j[a])) >= ext[a] for a in range(grid.dim)):
            uj = 2.0 * norm_p          # supports of u and its shift are disjoint
        else:
            sv = shift_array(vals, j)
            s1 = float(np.sum(np.abs(sv - vals) ** p))
            s2 = total_power - _window_sum(power, j)
            uj = (s1 + s2) * hd
        contrib = uj * kappa[i] * hd
        total += contrib
        err += kerr[i] * uj * hd
        if corrected[i]:
            near_share += contrib
    tail_share = 0.0
    if scheme.tail_compensation:
        tm = kernel_integral(kernel, "tail", cut_cells * h)
        if tm.value == math.inf:
            return EnergyReport(value=math.inf, error=math.inf, near_share=near_share,
                                tail_share=math.inf, method="shellsum", scheme=scheme,
                                notes={"p": p, "region": "whole-space",
                                       "divergent_tail_radius": cut_cells * h})
        tail_share = 2.0 * norm_p * tm.value
        total += tail_share
        err += 2.0 * norm_p * tm.error
    return EnergyReport(value=total, error=err, near_share=near_share,
                        tail_share=tail_share, method="shellsum", scheme=scheme,
                        notes={"p": p, "region": "whole-space"})


# --------------------------------------------------------------------------
# Perimeters
# --------------------------------------------------------------------------

def exterior_mass_field(kernel: Kernel, grid: Grid):
    """Per-cell kernel mass of the region beyond the grid box.

    Built from an interpolated tail-mass table: exact one-sided (half tail)
    split per face in 1D, and min(full tail at the nearest face, sum of half
    tails over all faces) in d >= 2.  Returns (field, error, diverged).
    """
    lo, hi = grid.box
    dmin = grid.h * 0.25
    dmax = math.sqrt(sum((hi[a] - lo[a]) ** 2 for a in range(grid.dim))) + grid.h
    radii = np.geomspace(dmin, dmax, 160)
    if math.isfinite(kernel.support_radius) and dmin < kernel.support_radius < dmax:
        radii = np.unique(np.concatenate([radii, np.linspace(kernel.support_radius * 0.9,
                                                             kernel.support_radius * 1.1, 20)]))
    masses = []
    errs = []
    for r in radii:
        res = kernel_integral(kernel, "tail", float(r))
        if not math.isfinite(res.value):
            return np.zeros(grid.shape), math.inf, True
        masses.append(res.value)
        errs.append(res.error)
    masses = np.array(masses)

    def tail_of(dist):
        return np.interp(dist, radii, masses)

    centers = grid.centers()
    face_d = []
    for a in range(grid.dim):
        face_d.append(centers[..., a] - lo[a])
        face_d.append(hi[a] - centers[..., a])
    half_sum = 0.5 * sum(tail_of(d) for d in face_d)
    if grid.dim == 1:
        field_vals = half_sum
    else:
        nearest = np.minimum.reduce(face_d)
        field_vals = np.minimum(tail_of(nearest), half_sum)
    err = float(np.max(errs)) + 0.02 * float(np.max(field_vals))  # interp slack
    return field_vals, err, False


def perimeter(e: GridSet, kernel: Kernel, omega: Optional[GridSet] = None,
              scheme: QuadratureScheme = DEFAULT_SCHEME) -> EnergyReport:
    """Non-local perimeter of a grid set.

    With ``omega=None`` this is half the whole-space seminorm of the
    indicator (zero extension outside the grid box; the far field enters
    through the kernel tail mass).  With a GridSet omega it is the relative
    perimeter: half weight on omega x omega interactions, full weight on
    omega x complement interactions, where the complement combines the grid
    box minus omega with a per-cell tail estimate for the region beyond the
    box.
    """
    grid = e.grid
    if omega is None:
        rep = seminorm(e.indicator(), kernel, p=1.0, region=None, scheme=scheme)
        return EnergyReport(value=0.5 * rep.value, error=0.5 * rep.error,
                            near_share=0.5 * rep.near_share,
                            tail_share=0.5 * rep.tail_share,
                            method="shellsum", scheme=scheme, notes={"relative": False})
    if not (omega.grid is grid or omega.grid.compatible(grid)):
        raise ValueError("set and domain live on different grids")
    hd = grid.cell_volume
    vals = e.cells.astype(float)
    inside = omega.cells.astype(float)
    outside = (~omega.cells).astype(float)
    offsets = _enumerate_offsets(grid.dim, tuple(grid.shape))
    kappa, corrected, kerr = _offset_weights(kernel, grid.h, offsets, scheme)
    total = 0.0
    near_share = 0.0
    err = 0.0
    for i in np.flatnonzero(kappa > 0):
        j = offsets[i]
        sv = shift_array(vals, j)
        s_in = shift_array(inside, j)
        s_out = shift_array(outside, j)
        diff = np.abs(sv - vals)
        u_oo = float(np.sum(diff * inside * s_in)) * hd
        u_oc = float(np.sum(diff * inside * s_out)) * hd
        contrib = (0.5 * u_oo + u_oc) * kappa[i] * hd
        total += contrib
        err += kerr[i] * (0.5 * u_oo + u_oc) * hd
        if corrected[i]:
            near_share += contrib
    tail_share = 0.0
    if scheme.tail_compensation:
        ext_field, ext_err, diverged = exterior_mass_field(kernel, grid)
        if diverged:
            return EnergyReport(value=math.inf, error=math.inf, method="shellsum",
                                scheme=scheme, notes={"relative": True})
        sel = e.cells & omega.cells
        tail_share = float(np.sum(ext_field[sel])) * hd
        total += tail_share
        err += ext_err * float(np.count_nonzero(sel)) * hd * 0.05
    return EnergyReport(value=total, error=err, near_share=near_share,
                        tail_share=tail_share, method="shellsum", scheme=scheme,
                        notes={"relative": True})


# --------------------------------------------------------------------------
# Interaction energy
# --------------------------------------------------------------------------

def _diagonal_weight(kernel: Kernel, h: float) -> float:
    """Exact same-cell pair weight (1/h^2d) int int_{C x C} K(x-y).

    Finite for kernels integrable near the origin even when K(0) = inf.
    """
    if not kernel.is_singular:
        return float(kernel(np.zeros((1, kernel.dim)))[0])
    near = kernel_integral(kernel, "ball", h * math.sqrt(kernel.dim))
    if not math.isfinite(near.value):
        return math.inf
    if kernel.dim == 1:
        def f(z):
            return (h - abs(z)) * float(kernel(np.array([[z]]))[0])
        val1, _ = integrate.quad(f, 1e-300, h, limit=100)
        val2, _ = integrate.quad(f, -h, -1e-300, limit=100)
        return (val1 + val2) / (h * h)
    return _tent_weight_numeric(kernel, np.zeros(kernel.dim), h, 32)


def interaction_energy(e: GridSet, kernel: Kernel, method: str = "direct") -> EnergyReport:
    """V(E) = sum over E x E of K(x-y) h^(2d) (diagonal pairs included).

    The direct path is a chunked pairwise double sum in fixed order; the fft
    path evaluates the same sum through a padded discrete convolution and is
    rejected for singular kernels.  Kernels that are not integrable on the
    cell scale yield the +inf sentinel.
    """
    grid = e.grid
    hd = grid.cell_volume
    if method == "fft":
        if kernel.is_singular:
            raise ValueError("fft interaction energy requires a non-singular "
                             "(e.g. capped) kernel")
        n = grid.shape
        axes = [np.arange(-(n[a] - 1), n[a]) * grid.h for a in range(grid.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        offs = np.stack([m.ravel() for m in mesh], axis=-1)
        table = kernel(offs).reshape([2 * n[a] - 1 for a in range(grid.dim)])
        ind = e.cells.astype(float)
        conv = signal.fftconvolve(ind, table, mode="full")
        sl = tuple(slice(n[a] - 1, 2 * n[a] - 1) for a in range(grid.dim))
        value = float(np.sum(conv[sl] * ind)) * hd * hd
        scale = float(np.max(np.abs(table), initial=0.0)) * e.count ** 2
        return EnergyReport(value=value, error=1e-13 * scale * hd * hd + 1e-300,
                            method="fft", notes={"cells": e.count})
    if method != "direct":
        raise ValueError(f"unknown interaction energy method {method!r}")
    diag = _diagonal_weight(kernel, grid.h)
    if not math.isfinite(diag):
        return EnergyReport(value=math.inf, error=math.inf, method="direct",
                            notes={"reason": "kernel not integrable on cells"})
    centers = e.occupied_centers()
    m = len(centers)
    if m == 0:
        return EnergyReport(value=0.0, error=0.0, method="direct", notes={"cells": 0})
    total = 0.0
    chunk = max(1, int(2_000_000 // max(m, 1)))
    for start in range(0, m, chunk):
        block = centers[start:start + chunk]
        diffs = block[:, None, :] - centers[None, :, :]
        vals = kernel(diffs.reshape(-1, grid.dim))
        total += float(np.sum(np.where(np.isfinite(vals), vals, 0.0)))
    # replace the midpoint diagonal by the exact same-cell weight
    k0 = float(kernel(np.zeros((1, grid.dim)))[0]) if not kernel.is_singular else 0.0
    total += (diag - k0) * m
    value = total * hd * hd
    return EnergyReport(value=value, error=1e-12 * abs(value) * math.sqrt(m) + 1e-300,
                        method="direct", notes={"cells": m})


def perimeter_via_energy(e: GridSet, kernel: Kernel, method: str = "direct") -> EnergyReport:
    """Perimeter through the identity  P(E) = ||K||_1 |E| - V(E).

    Valid for symmetric integrable kernels; rejected otherwise.
    """
    if not kernel.symmetric:
        raise ValueError("the energy identity needs a symmetric kernel")
    mass = kernel_integral(kernel, "all")
    if not mass.finite:
        raise ValueError("the energy identity needs an integrable kernel")
    v = interaction_energy(e, kernel, method=method)
    if not math.isfinite(v.value):
        raise ValueError("interaction energy is infinite for this kernel")
    value = mass.value * e.volume - v.value
    return EnergyReport(value=value, error=mass.error * e.volume + v.error,
                        method="energy-identity",
                        notes={"kernel_mass": mass.value, "interaction": v.value})


# --------------------------------------------------------------------------
# Non-local curvature
# --------------------------------------------------------------------------

@dataclass
class CurvatureResult:
    value: float
    error: float
    epsilons: list
    iterates: list
    status: str          # "ok" | "inconclusive"


def curvature(e: GridSet, x, kernel: Kernel, schedule=None) -> CurvatureResult:
    """Non-local boundary curvature at a point x on the rasterized boundary.

    For symmetric kernels the signed integral over the complement of a small
    ball reduces, by cancellation of half spaces, to

        H_eps(x) = ||K||_{L1(|z|>eps)} - 2 * int_{E minus B_eps(x)} K(x-y) dy,

    which avoids any exterior truncation error.  The reported value is the
    last iterate of the geometric epsilon schedule and the error bar is the
    spread of the last three iterates.
    """
    if not kernel.symmetric:
        raise ValueError("curvature is defined for symmetric kernels")
    grid = e.grid
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (grid.dim,):
        raise ValueError("point dimension does not match grid")
    h = grid.h
    if schedule is None:
        schedule, eps = [], 8.0 * h
        while eps >= h * (1.0 - 1e-12):
            schedule.append(eps)
            eps /= 2.0
    schedule = sorted(set(float(s) for s in schedule), reverse=True)
    if not schedule or schedule[-1] < h * (1.0 - 1e-12):
        raise ValueError("epsilon schedule must stay above the grid spacing")
    occ = e.occupied_centers()
    if len(occ) == 0:
        raise ValueError("curvature of the empty set is undefined")
    dist = np.sqrt(np.sum((occ - x[None, :]) ** 2, axis=-1))
    near_limit = 2.0 * math.sqrt(grid.dim) * h
    if np.min(dist) > near_limit:
        raise ValueError("point does not lie on the rasterized boundary")
    empty = grid.centers()[~e.cells]
    if len(empty) > 0:
        d_empty = np.min(np.sqrt(np.sum((empty - x[None, :]) ** 2, axis=-1)))
        lo, hi = grid.box
        d_box = min(min(x[a] - lo[a], hi[a] - x[a]) for a in range(grid.dim))
        if min(d_empty, abs(d_box)) > near_limit:
            raise ValueError("point does not lie on the rasterized boundary")
    kvals = kernel(occ - x[None, :])
    kvals = np.where(np.isfinite(kvals), kvals, 0.0)
    iterates = []
    for eps in schedule:
        tm = kernel_integral(kernel, "tail", eps)
        if not math.isfinite(tm.value):
            raise ValueError("curvature needs far-field integrable kernels")
        inner = float(np.sum(kvals[dist > eps])) * grid.cell_volume
        iterates.append(tm.value - 2.0 * inner)
    last = iterates[-3:] if len(iterates) >= 3 else iterates
    spread = max(last) - min(last)
    value = iterates[-1]
    status = "ok" if spread <= max(0.25 * abs(value), 0.05 * (abs(value) + 1.0)) else "inconclusive"
    return CurvatureResult(value=value, error=spread, epsilons=list(schedule),
                           iterates=iterates, status=status)


# --------------------------------------------------------------------------
# Divergence probe
# --------------------------------------------------------------------------

@dataclass
class ProbeResult:
    radii: list
    partials: list

    @property
    def growth_ratio(self) -> float:
        if not self.partials or self.partials[0] == 0.0:
            return math.inf if any(self.partials) else 0.0
        return self.partials[-1] / self.partials[0]

    def tail_cauchy(self, lag: int = 3) -> float:
        """Relative change over the last ``lag`` entries."""
        if len(self.partials) <= lag or self.partials[-1] == 0.0:
            return 0.0
        return abs(self.partials[-1] - self.partials[-1 - lag]) / abs(self.partials[-1])


def divergence_probe(u: GridFunction, kernel: Kernel, p: float = 1.0,
                     schedule=None, scheme: QuadratureScheme = DEFAULT_SCHEME) -> ProbeResult:
    """Partial whole-space seminorms over expanding shift shells.

    The first shell covers all shifts up to the support diameter of u (an
    exact grid sum); beyond it each shift contributes exactly 2||u||_p^p, so
    every additional shell adds 2||u||_p^p times an annulus kernel mass.  The
    sequence grows without bound exactly when far-field integrability fails.
    """
    grid = u.grid
    supp = u.values != 0.0
    hd = grid.cell_volume
    norm_p = float(np.sum(np.abs(u.values) ** p)) * hd
    n_default = 15
    if not supp.any():
        n = n_default if schedule is None else len(schedule)
        return ProbeResult(radii=[0.0] * n, partials=[0.0] * n)
    idx = np.argwhere(supp)
    ext = (idx.max(axis=0) - idx.min(axis=0) + 1).astype(float)
    diam = float(np.sqrt(np.sum((ext * grid.h) ** 2))) + grid.h
    if schedule is None:
        schedule = [diam * 8.0 ** k for k in range(n_default)]
    schedule = sorted(float(s) for s in schedule)
    if schedule[0] < diam:
        schedule = [diam] + [s for s in schedule if s > diam]
    first = seminorm(u, kernel, p=p, region=None,
                     scheme=QuadratureScheme(near_field=scheme.near_field,
                                             near_shells=scheme.near_shells,
                                             cutoff_radius=schedule[0],
                                             tail_compensation=False)).value
    partials = [first]
    radii = [schedule[0]]
    for a, b in zip(schedule, schedule[1:]):
        mass = annulus_mass(kernel, a, b)
        partials.append(partials[-1] + 2.0 * norm_p * mass.value)
        radii.append(b)
    return ProbeResult(radii=radii, partials=partials)
