"""Interaction kernels, generic norms, and the kernel zoo.

A kernel is a non-negative measurable weight on R^d, not a.e. zero, used to
weight pairwise interactions |u(x)-u(y)|^p K(x-y).  Kernels carry metadata
(singularity structure, support radius, radial profile, near-origin power law)
that the quadrature and energy evaluators exploit.  All kernels are immutable
after construction and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special


# --------------------------------------------------------------------------
# Generic norms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Norm:
    """A norm |.|_* on R^d with equivalence constants to the euclidean norm.

    Invariant: lower*|x|_2 <= |x|_* <= upper*|x|_2 for all x.
    """

    kind: str                      # "euclidean" | "ell_p" | "weighted"
    dim: int
    p: float = 2.0                 # exponent for ell_p
    weights: tuple = ()            # per-axis positive weights for "weighted"
    lower: float = 1.0
    upper: float = 1.0

    def value(self, z: np.ndarray) -> np.ndarray:
        """Evaluate |z|_* for points of shape (..., dim)."""
        z = np.asarray(z, dtype=float)
        if self.kind == "euclidean":
            return np.sqrt(np.sum(z * z, axis=-1))
        if self.kind == "ell_p":
            return np.sum(np.abs(z) ** self.p, axis=-1) ** (1.0 / self.p)
        if self.kind == "weighted":
            w = np.asarray(self.weights, dtype=float)
            zw = z * w
            return np.sqrt(np.sum(zw * zw, axis=-1))
        raise ValueError(f"unknown norm kind {self.kind!r}")

    @property
    def axis_symmetric(self) -> bool:
        # |(x_1,..,-x_a,..)|_* == |x|_* for every axis; true for all kinds here.
        return True

    def unit_ball_volume(self) -> float:
        """Lebesgue volume of {|z|_* < 1}."""
        d = self.dim
        if self.kind == "euclidean":
            return math.pi ** (d / 2.0) / special.gamma(d / 2.0 + 1.0)
        if self.kind == "ell_p":
            return (2.0 * special.gamma(1.0 + 1.0 / self.p)) ** d / special.gamma(1.0 + d / self.p)
        if self.kind == "weighted":
            eu = math.pi ** (d / 2.0) / special.gamma(d / 2.0 + 1.0)
            return eu / float(np.prod(self.weights))
        raise ValueError(f"unknown norm kind {self.kind!r}")


def euclidean_norm(dim: int) -> Norm:
    return Norm(kind="euclidean", dim=dim)


def ell_p_norm(dim: int, p: float) -> Norm:
    if p < 1:
        raise ValueError("ell_p norm requires p >= 1")
    if p >= 2:
        lower, upper = dim ** (1.0 / p - 0.5), 1.0
    else:
        lower, upper = 1.0, dim ** (1.0 / p - 0.5)
    return Norm(kind="ell_p", dim=dim, p=p, lower=lower, upper=upper)


def weighted_norm(weights: Sequence[float]) -> Norm:
    w = tuple(float(x) for x in weights)
    if not w or any(x <= 0 for x in w):
        raise ValueError("weighted norm requires positive per-axis weights")
    return Norm(kind="weighted", dim=len(w), weights=w, lower=min(w), upper=max(w))


# --------------------------------------------------------------------------
# Kernel
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    """One-dimensional profile kappa with K(z) = kappa(|z|_norm).

    ``breakpoints`` lists radii where kappa has kinks or jumps (quadrature
    hints).  ``nonincreasing`` marks profiles known to be monotone, which
    makes the decreasing rearrangement of the kernel the identity.
    """

    norm: Norm
    profile: Callable[[np.ndarray], np.ndarray]
    breakpoints: tuple = ()
    nonincreasing: bool = False


@dataclass(frozen=True)
class Kernel:
    """Evaluable interaction weight on R^d.

    ``fn`` maps an array of points with shape (n, dim) to values in
    [0, +inf]; singular kernels return ``inf`` at the origin.  ``near_power``
    = (amp, sigma, radius) records that K(z) = amp*|z|_2^(-dim-sigma) exactly
    for 0 < |z|_2 <= radius, which enables analytic near-field corrections.
    """

    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    singular_set: str = "origin-only"        # "origin-only" | "none"
    support_radius: float = math.inf
    symmetric: bool = True
    radial: Optional[RadialProfile] = None
    near_power: Optional[tuple] = None       # (amp, sigma, radius)
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, z) -> np.ndarray:
        """Evaluate K at points of shape (n, dim) or a single point (dim,)."""
        pts = np.atleast_2d(np.asarray(z, dtype=float))
        if pts.shape[-1] != self.dim:
            raise ValueError(f"points have dimension {pts.shape[-1]}, kernel has {self.dim}")
        vals = self.fn(pts)
        vals = np.asarray(vals, dtype=float)
        if np.ndim(z) == 1:
            return float(vals[0])
        return vals

    @property
    def is_singular(self) -> bool:
        return self.singular_set != "none"

    def profile_value(self, t: np.ndarray) -> np.ndarray:
        """Evaluate the radial profile kappa(t); only for radial kernels."""
        if self.radial is None:
            raise ValueError("kernel has no radial profile")
        return self.radial.profile(np.asarray(t, dtype=float))


def _radial_from_profile(dim, profile, norm, **kw) -> Callable:
    def fn(pts):
        t = norm.value(pts)
        return profile(t)
    return fn


def _guard_singular(profile):
    """Wrap a profile so that t == 0 maps to +inf without warnings."""
    def wrapped(t):
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        zero = t <= 0.0
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            out[~zero] = profile(t[~zero])
        out[zero] = np.inf
        return out
    return wrapped


# --------------------------------------------------------------------------
# The kernel zoo
# --------------------------------------------------------------------------

def fractional_kernel(dim: int, s: float, p: float = 1.0, amplitude: float = 1.0,
                      norm: Optional[Norm] = None) -> Kernel:
    """K(z) = amplitude * |z|_*^(-dim - s*p)."""
    if not 0.0 < s < 1.0:
        raise ValueError("fractional kernel requires 0 < s < 1")
    if p < 1:
        raise ValueError("fractional kernel requires p >= 1")
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    nrm = norm if norm is not None else euclidean_norm(dim)
    sigma = s * p
    expo = dim + sigma

    def profile(t):
        return amplitude * t ** (-expo)

    prof = _guard_singular(profile)
    near = None
    if nrm.kind == "euclidean":
        near = (amplitude, sigma, math.inf)
    elif dim == 1:
        # any 1D norm is w*|.|; fold the scale into the amplitude
        w = float(nrm.value(np.array([1.0])))
        near = (amplitude * w ** (-expo), sigma, math.inf)
    return Kernel(dim=dim, fn=_radial_from_profile(dim, prof, nrm),
                  singular_set="origin-only", support_radius=math.inf,
                  symmetric=True,
                  radial=RadialProfile(norm=nrm, profile=prof, nonincreasing=True),
                  near_power=near, family="fractional",
                  params={"s": s, "p": p, "amplitude": amplitude})


def piecewise_fractional_kernel(dim: int, s: Sequence[float], alpha: Sequence[float],
                                radii: Sequence[float], p: float = 1.0,
                                norm: Optional[Norm] = None) -> Kernel:
    """Piecewise power-law kernel: alpha_k * |z|_*^(-dim - s_k*p) on shell k.

    Shells are (0, R_1], (R_1, R_2], ..., (R_{M-1}, inf) for M pieces.
    Requires alpha non-increasing (>=0, alpha_1 > 0), s non-decreasing in
    (0,1), and 1 <= R_1 < ... < R_{M-1}.
    """
    s = [float(x) for x in s]
    alpha = [float(x) for x in alpha]
    radii = [float(x) for x in radii]
    m = len(s)
    if len(alpha) != m or len(radii) != m - 1:
        raise ValueError("need len(alpha) == len(s) and len(radii) == len(s)-1")
    if any(not 0.0 < x < 1.0 for x in s) or any(s[i] > s[i + 1] for i in range(m - 1)):
        raise ValueError("exponents s must be non-decreasing and lie in (0,1)")
    if any(alpha[i] < alpha[i + 1] for i in range(m - 1)) or any(a < 0 for a in alpha):
        raise ValueError("weights alpha must be non-negative and non-increasing")
    if alpha[0] <= 0:
        raise ValueError("leading weight must be positive")
    if radii and (radii[0] < 1.0 or any(radii[i] >= radii[i + 1] for i in range(len(radii) - 1))):
        raise ValueError("piece radii must satisfy 1 <= R_1 < R_2 < ...")
    nrm = norm if norm is not None else euclidean_norm(dim)
    edges = np.array(radii, dtype=float)
    al = np.array(alpha, dtype=float)
    ex = dim + np.array(s, dtype=float) * p

    def profile(t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(edges, t, side="left")
        return al[k] * t ** (-ex[k])

    prof = _guard_singular(profile)
    near_radius = radii[0] if radii else math.inf
    near = None
    if nrm.kind == "euclidean":
        near = (alpha[0], s[0] * p, near_radius)
    elif dim == 1:
        w = float(nrm.value(np.array([1.0])))
        near = (alpha[0] * w ** (-(dim + s[0] * p)), s[0] * p, near_radius / w)
    return Kernel(dim=dim, fn=_radial_from_profile(dim, prof, nrm),
                  singular_set="origin-only", support_radius=math.inf,
                  symmetric=True,
                  radial=RadialProfile(norm=nrm, profile=prof,
                                       breakpoints=tuple(radii), nonincreasing=True),
                  near_power=near, family="piecewise-fractional",
                  params={"s": tuple(s), "alpha": tuple(alpha), "radii": tuple(radii), "p": p})


def log_fractional_kernel(dim: int, s: float, alpha: float,
                          norm: Optional[Norm] = None) -> Kernel:
    """K(z) = (1 - log|z|_*)^(-alpha) * |z|_*^(-dim-s) for |z|_* <= 1, else 0."""
    if not 0.0 < s < 1.0:
        raise ValueError("log-fractional kernel requires 0 < s < 1")
    nrm = norm if norm is not None else euclidean_norm(dim)

    def profile(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        inside = (t > 0) & (t <= 1.0)
        ti = t[inside]
        out[inside] = (1.0 - np.log(ti)) ** (-alpha) * ti ** (-dim - s)
        return out

    prof = _guard_singular(profile)
    noninc = alpha <= 0.0
    return Kernel(dim=dim, fn=_radial_from_profile(dim, prof, nrm),
                  singular_set="origin-only",
                  support_radius=1.0 * nrm.upper / nrm.lower if nrm.kind != "euclidean" else 1.0,
                  symmetric=True,
                  radial=RadialProfile(norm=nrm, profile=prof, breakpoints=(1.0,),
                                       nonincreasing=noninc),
                  near_power=None, family="log-fractional",
                  params={"s": s, "alpha": alpha})


def oscillating_kernel(dim: int, s: float, alpha: float, beta: float, m: int,
                       norm: Optional[Norm] = None) -> Kernel:
    """Radial kernel whose profile oscillates between power-law pieces.

    kappa(t) = beta*t^(-dim-s) on (0,1], alpha*sin(2*pi*t)+beta on (1,m],
    beta*(t-m+1)^(-dim-s) on (m,inf).  Requires 0 < alpha < beta.
    """
    if not 0.0 < alpha < beta:
        raise ValueError("oscillating kernel requires 0 < alpha < beta")
    if m < 1 or int(m) != m:
        raise ValueError("m must be a positive integer")
    if not 0.0 < s < 1.0:
        raise ValueError("oscillating kernel requires 0 < s < 1")
    nrm = norm if norm is not None else euclidean_norm(dim)
    m = int(m)

    def profile(t):
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        a = t <= 1.0
        b = (t > 1.0) & (t <= m)
        c = t > m
        out[a] = beta * t[a] ** (-dim - s)
        out[b] = alpha * np.sin(2.0 * math.pi * t[b]) + beta
        out[c] = beta * (t[c] - m + 1.0) ** (-dim - s)
        return out

    prof = _guard_singular(profile)
    near = None
    if nrm.kind == "euclidean":
        near = (beta, s, 1.0)
    elif dim == 1:
        w = float(nrm.value(np.array([1.0])))
        near = (beta * w ** (-dim - s), s, 1.0 / w)
    return Kernel(dim=dim, fn=_radial_from_profile(dim, prof, nrm),
                  singular_set="origin-only", support_radius=math.inf,
                  symmetric=True,
                  radial=RadialProfile(norm=nrm, profile=prof,
                                       breakpoints=tuple(float(k) for k in range(1, m + 1)),
                                       nonincreasing=False),
                  near_power=near, family="oscillating",
                  params={"s": s, "alpha": alpha, "beta": beta, "m": m})


def log_gamma_kernel(gamma: float) -> Kernel:
    """1D kernel |x|^-1 * (-log|x|)^(gamma-1) on (-1/3, 1/3), zero outside."""
    if gamma <= 0:
        raise ValueError("log-gamma kernel requires gamma > 0")

    def profile(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        inside = (t > 0) & (t < 1.0 / 3.0)
        ti = t[inside]
        out[inside] = (-np.log(ti)) ** (gamma - 1.0) / ti
        return out

    prof = _guard_singular(profile)
    nrm = euclidean_norm(1)
    return Kernel(dim=1, fn=_radial_from_profile(1, prof, nrm),
                  singular_set="origin-only", support_radius=1.0 / 3.0,
                  symmetric=True,
                  radial=RadialProfile(norm=nrm, profile=prof, breakpoints=(1.0 / 3.0,),
                                       nonincreasing=True),
                  near_power=None, family="log-gamma", params={"gamma": gamma})


def indicator_kernel(dim: int, radius: float = 1.0, amplitude: float = 1.0,
                     norm: Optional[Norm] = None) -> Kernel:
    """K = amplitude on {|z|_* < radius}, zero outside."""
    if radius <= 0 or amplitude <= 0:
        raise ValueError("indicator kernel requires positive radius and amplitude")
    nrm = norm if norm is not None else euclidean_norm(dim)

    def profile(t):
        t = np.asarray(t, dtype=float)
        return np.where(t < radius, amplitude, 0.0)

    support = radius / nrm.lower  # euclidean radius enclosing the support
    return Kernel(dim=dim, fn=_radial_from_profile(dim, profile, nrm),
                  singular_set="none", support_radius=support,
                  symmetric=True,
                  radial=RadialProfile(norm=nrm, profile=profile, breakpoints=(radius,),
                                       nonincreasing=True),
                  near_power=None, family="indicator",
                  params={"radius": radius, "amplitude": amplitude})


def gaussian_kernel(dim: int, sigma: float = 1.0, amplitude: float = 1.0) -> Kernel:
    """Smooth bounded kernel amplitude * exp(-|z|^2 / (2 sigma^2))."""
    if sigma <= 0 or amplitude <= 0:
        raise ValueError("gaussian kernel requires positive sigma and amplitude")
    nrm = euclidean_norm(dim)

    def profile(t):
        t = np.asarray(t, dtype=float)
        return amplitude * np.exp(-t * t / (2.0 * sigma * sigma))

    return Kernel(dim=dim, fn=_radial_from_profile(dim, profile, nrm),
                  singular_set="none", support_radius=math.inf,
                  symmetric=True,
                  radial=RadialProfile(norm=nrm, profile=profile, nonincreasing=True),
                  near_power=None, family="gaussian",
                  params={"sigma": sigma, "amplitude": amplitude})


# --------------------------------------------------------------------------
# Transforms
# --------------------------------------------------------------------------

def symmetrize(kernel: Kernel) -> Kernel:
    """Return the even part (K(z) + K(-z))/2.

    Seminorms are invariant under this substitution, and integrability,
    positivity and near-origin bounds are preserved.
    """
    if kernel.symmetric:
        return kernel
    base = kernel.fn

    def fn(pts):
        return 0.5 * (base(pts) + base(-pts))

    return replace(kernel, fn=fn, symmetric=True, family=kernel.family + "+sym")


def truncate(kernel: Kernel, mode: str, value: float) -> Kernel:
    """Truncate a kernel.

    mode "outside-ball" / "annulus-exclude": zero the kernel on the euclidean
    ball {|z|_2 < value} (the two names come from different uses of the same
    restriction).  mode "cap": replace K by min(value, K).
    """
    if value <= 0:
        raise ValueError("truncation parameter must be positive")
    base = kernel.fn
    if mode in ("outside-ball", "annulus-exclude"):
        delta = float(value)

        def fn(pts):
            r2 = np.sum(np.asarray(pts, dtype=float) ** 2, axis=-1)
            vals = base(pts)
            return np.where(r2 >= delta * delta, vals, 0.0)

        radial = None
        if kernel.radial is not None and kernel.radial.norm.kind == "euclidean":
            prof = kernel.radial.profile

            def tprof(t):
                t = np.asarray(t, dtype=float)
                return np.where(t >= delta, prof(t), 0.0)

            radial = RadialProfile(norm=kernel.radial.norm, profile=tprof,
                                   breakpoints=tuple(sorted(set(kernel.radial.breakpoints) | {delta})),
                                   nonincreasing=False)
        return replace(kernel, fn=fn, singular_set="none", radial=radial,
                       near_power=None, family=kernel.family + "+excl",
                       params={**kernel.params, "excluded_radius": delta})
    if mode == "cap":
        cap = float(value)

        def fn(pts):
            return np.minimum(base(pts), cap)

        radial = None
        if kernel.radial is not None:
            prof = kernel.radial.profile

            def tprof(t):
                return np.minimum(prof(np.asarray(t, dtype=float)), cap)

            radial = RadialProfile(norm=kernel.radial.norm, profile=tprof,
                                   breakpoints=kernel.radial.breakpoints,
                                   nonincreasing=kernel.radial.nonincreasing)
        return replace(kernel, fn=fn, singular_set="none", radial=radial,
                       near_power=None, family=kernel.family + "+cap",
                       params={**kernel.params, "cap": cap})
    raise ValueError(f"unknown truncation mode {mode!r}")


# --------------------------------------------------------------------------
# Plain-text kernel specifications
# --------------------------------------------------------------------------

class SpecFormatError(ValueError):
    """Malformed key/value specification text."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def parse_keyvalue(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecFormatError("expected 'key = value'", lineno, len(raw) - len(raw.lstrip()) + 1)
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if not key:
            raise SpecFormatError("empty key", lineno)
        if key in out:
            raise SpecFormatError(f"duplicate key {key!r}", lineno)
        out[key] = val
    return out


def _get_float(spec, key, default=None):
    if key not in spec:
        if default is None:
            raise ValueError(f"missing kernel parameter {key!r}")
        return default
    try:
        return float(spec[key])
    except ValueError:
        raise ValueError(f"kernel parameter {key!r} is not a number: {spec[key]!r}")


def _get_floats(spec, key):
    try:
        return [float(tok) for tok in spec[key].replace(",", " ").split()]
    except KeyError:
        raise ValueError(f"missing kernel parameter {key!r}")
    except ValueError:
        raise ValueError(f"kernel parameter {key!r} is not a number list: {spec[key]!r}")


def norm_from_spec(spec: dict, dim: int) -> Norm:
    kind = spec.get("norm", "euclidean")
    if kind == "euclidean":
        return euclidean_norm(dim)
    if kind == "ell_p":
        return ell_p_norm(dim, _get_float(spec, "norm_p"))
    if kind == "weighted":
        return weighted_norm(_get_floats(spec, "norm_weights"))
    raise ValueError(f"unknown norm {kind!r}")


def construct(spec: dict | str) -> Kernel:
    """Build a kernel from a specification mapping or key/value text.

    Recognised families: fractional, piecewise-fractional, log-fractional,
    oscillating, log-gamma, indicator, gaussian.  Optional post-transforms:
    ``exclude_radius`` (zero inside a ball), ``cap`` (pointwise minimum).
    """
    if isinstance(spec, str):
        spec = parse_keyvalue(spec)
    family = spec.get("family")
    if family is None:
        raise ValueError("kernel specification needs a 'family' key")
    dim = int(_get_float(spec, "d", 1))
    norm = norm_from_spec(spec, dim)

    if family == "fractional":
        kernel = fractional_kernel(dim, _get_float(spec, "s"),
                                   p=_get_float(spec, "p", 1.0),
                                   amplitude=_get_float(spec, "amplitude", 1.0),
                                   norm=norm)
    elif family == "piecewise-fractional":
        kernel = piecewise_fractional_kernel(dim, _get_floats(spec, "s"),
                                             _get_floats(spec, "alpha"),
                                             _get_floats(spec, "radii") if "radii" in spec else [],
                                             p=_get_float(spec, "p", 1.0), norm=norm)
    elif family == "log-fractional":
        kernel = log_fractional_kernel(dim, _get_float(spec, "s"),
                                       _get_float(spec, "alpha"), norm=norm)
    elif family == "oscillating":
        kernel = oscillating_kernel(dim, _get_float(spec, "s"), _get_float(spec, "alpha"),
                                    _get_float(spec, "beta"), int(_get_float(spec, "m")),
                                    norm=norm)
    elif family == "log-gamma":
        kernel = log_gamma_kernel(_get_float(spec, "gamma"))
    elif family == "indicator":
        kernel = indicator_kernel(dim, radius=_get_float(spec, "radius", 1.0),
                                  amplitude=_get_float(spec, "amplitude", 1.0), norm=norm)
    elif family == "gaussian":
        kernel = gaussian_kernel(dim, sigma=_get_float(spec, "sigma", 1.0),
                                 amplitude=_get_float(spec, "amplitude", 1.0))
    else:
        raise ValueError(f"unknown kernel family {family!r}")

    if "exclude_radius" in spec:
        kernel = truncate(kernel, "outside-ball", _get_float(spec, "exclude_radius"))
    if "cap" in spec:
        kernel = truncate(kernel, "cap", _get_float(spec, "cap"))
    return kernel
