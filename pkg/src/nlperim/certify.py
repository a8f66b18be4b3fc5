"""Sampling-based certification of kernel hypotheses.

Each hypothesis gets a verdict in {holds, fails, inconclusive} together with
the estimated constant it governs (c0 for near-monotonicity, C_D for the
doubling bound, integral values, (r, mu) for the positive-infimum check).
Certification is sampling-based: "holds" means "holds on the sample", while
"fails" always comes with concrete, re-evaluable witness points.  Reports are
deterministic given the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .kernels import Kernel, Norm, euclidean_norm
from .quadrature import kernel_integral

HYPOTHESES = ("Nint", "Far", "Dec", "Dou", "Nts", "Sym", "Pos", "Inf")

_FAIL_FLOOR = 1e-12     # a sampled ratio below this counts as a c0 = 0 witness


@dataclass(frozen=True)
class SamplingConfig:
    seed: int = 0
    samples: int = 4000
    box_radius: float = 4.0       # sampling box is [-R, R]^d
    doubling_bound: Optional[float] = None   # D; default support/2 or 1
    nts_p: float = 1.0
    far_radii: tuple = (0.25, 1.0, 4.0)
    inf_radius: Optional[float] = None

    def to_dict(self) -> dict:
        return {"seed": self.seed, "samples": self.samples, "box_radius": self.box_radius,
                "doubling_bound": self.doubling_bound, "nts_p": self.nts_p,
                "far_radii": list(self.far_radii), "inf_radius": self.inf_radius}


@dataclass
class CertificateReport:
    hypothesis: str
    verdict: str                      # "holds" | "fails" | "inconclusive"
    constants: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def default(o):
            if isinstance(o, (np.floating, np.integer)):
                return float(o)
            if isinstance(o, np.ndarray):
                return o.tolist()
            if o == math.inf:
                return "inf"
            raise TypeError(type(o))
        payload = {"hypothesis": self.hypothesis, "verdict": self.verdict,
                   "constants": {k: ("inf" if v == math.inf else v) for k, v in self.constants.items()},
                   "witnesses": self.witnesses, "config": self.config}
        return json.dumps(payload, sort_keys=True, default=default)


def _finite_positive(vals):
    return np.isfinite(vals) & (vals > 0)


def _sample_points(rng, n, dim, radius):
    return rng.uniform(-radius, radius, size=(n, dim))


def certify(kernel: Kernel, hypothesis: str, norm: Optional[Norm] = None,
            cfg: Optional[SamplingConfig] = None) -> CertificateReport:
    """Certify one kernel hypothesis numerically.

    Integral hypotheses (Nint, Far, Nts) delegate to ``kernel_integral`` and
    their certificate is the integral value itself; pointwise hypotheses
    (Dec, Dou, Sym, Pos, Inf) are sampled.
    """
    cfg = cfg or SamplingConfig()
    norm = norm or euclidean_norm(kernel.dim)
    if norm.dim != kernel.dim:
        raise ValueError("norm dimension does not match kernel dimension")
    base = {"norm": norm.kind, "hypothesis": hypothesis, **cfg.to_dict()}
    name = hypothesis.split("_")[0]
    if name not in HYPOTHESES:
        raise ValueError(f"unknown hypothesis {hypothesis!r}")

    if name == "Nint":
        res = kernel_integral(kernel, "all")
        if res.status == "divergent":
            return CertificateReport(hypothesis, "holds", {"integral": math.inf}, [], base)
        if res.status == "inconclusive":
            return CertificateReport(hypothesis, "inconclusive",
                                     {"integral": res.value, "error": res.error}, [], base)
        return CertificateReport(hypothesis, "fails",
                                 {"integral": res.value, "error": res.error},
                                 [{"kind": "finite-integral", "region": "all", "value": res.value}],
                                 base)

    if name == "Far":
        masses = {}
        for r in cfg.far_radii:
            res = kernel_integral(kernel, "tail", r)
            masses[f"tail({r})"] = res.value
            if res.status == "divergent":
                return CertificateReport(hypothesis, "fails", masses,
                                         [{"kind": "divergent-tail", "radius": r}], base)
            if res.status == "inconclusive":
                return CertificateReport(hypothesis, "inconclusive", masses, [], base)
        return CertificateReport(hypothesis, "holds", masses, [], base)

    if name == "Nts":
        res = kernel_integral(kernel, "all", weight=cfg.nts_p)
        if res.status == "divergent":
            return CertificateReport(hypothesis, "fails", {"integral": math.inf},
                                     [{"kind": "divergent-integral", "weight_p": cfg.nts_p}], base)
        if res.status == "inconclusive":
            return CertificateReport(hypothesis, "inconclusive",
                                     {"integral": res.value, "error": res.error}, [], base)
        return CertificateReport(hypothesis, "holds",
                                 {"integral": res.value, "error": res.error}, [], base)

    rng = np.random.default_rng(cfg.seed)

    if name == "Dec":
        x = _sample_points(rng, cfg.samples, kernel.dim, cfg.box_radius)
        y = _sample_points(rng, cfg.samples, kernel.dim, cfg.box_radius)
        nx, ny = norm.value(x), norm.value(y)
        swap = nx > ny
        x[swap], y[swap] = y[swap].copy(), x[swap].copy()
        kx, ky = kernel(x), kernel(y)
        use = _finite_positive(ky) & np.isfinite(kx)
        if not np.any(use):
            return CertificateReport(hypothesis, "inconclusive", {}, [], base)
        ratios = np.minimum(kx[use] / ky[use], 1.0)
        i_min = int(np.argmin(ratios))
        c0 = float(ratios[i_min])
        idx = np.flatnonzero(use)[i_min]
        if c0 < _FAIL_FLOOR:
            wit = {"x": x[idx].tolist(), "y": y[idx].tolist(),
                   "K(x)": float(kx[idx]), "K(y)": float(ky[idx])}
            return CertificateReport(hypothesis, "fails", {"c0": c0}, [wit], base)
        return CertificateReport(hypothesis, "holds", {"c0": c0}, [], base)

    if name == "Dou":
        D = cfg.doubling_bound
        if D is None:
            D = kernel.support_radius / 2.0 if math.isfinite(kernel.support_radius) else 1.0
        # x uniform in the *-ball of radius D (rejection from the enclosing box)
        pts = []
        cap = max(4 * cfg.samples, 16)
        batch = _sample_points(rng, cap, kernel.dim, D / norm.lower)
        inside = norm.value(batch) <= D
        pts = batch[inside][:cfg.samples]
        if len(pts) == 0:
            return CertificateReport(hypothesis, "inconclusive", {"D": D}, [], base)
        dirs = rng.standard_normal(size=(len(pts), kernel.dim))
        dn = norm.value(dirs)
        good = dn > 0
        pts, dirs, dn = pts[good], dirs[good], dn[good]
        y = dirs * (2.0 * norm.value(pts) / dn)[:, None]
        kx, ky = kernel(pts), kernel(y)
        finite_x = np.isfinite(kx)
        zero_y = finite_x & (kx > 0) & (ky == 0.0)
        if np.any(zero_y):
            i = int(np.flatnonzero(zero_y)[0])
            wit = {"x": pts[i].tolist(), "y": y[i].tolist(),
                   "K(x)": float(kx[i]), "K(y)": float(ky[i])}
            return CertificateReport(hypothesis, "fails", {"D": D, "C_D": math.inf}, [wit], base)
        use = finite_x & _finite_positive(ky)
        if not np.any(use):
            return CertificateReport(hypothesis, "inconclusive", {"D": D}, [], base)
        cd = float(np.max(kx[use] / ky[use]))
        return CertificateReport(hypothesis, "holds", {"D": D, "C_D": cd}, [], base)

    if name == "Sym":
        x = _sample_points(rng, cfg.samples, kernel.dim, cfg.box_radius)
        kx, kmx = kernel(x), kernel(-x)
        both = np.isfinite(kx) & np.isfinite(kmx)
        dev = np.zeros(len(x))
        dev[both] = np.abs(kx[both] - kmx[both])
        dev[~both & (np.isinf(kx) != np.isinf(kmx))] = math.inf
        scale = np.where(both, np.maximum(np.abs(kx), np.abs(kmx)), 1.0)
        bad = dev > 1e-9 * (1.0 + scale)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            wit = {"x": x[i].tolist(), "K(x)": float(kx[i]), "K(-x)": float(kmx[i])}
            return CertificateReport(hypothesis, "fails",
                                     {"max_asymmetry": float(np.max(dev[np.isfinite(dev)], initial=0.0))},
                                     [wit], base)
        return CertificateReport(hypothesis, "holds",
                                 {"max_asymmetry": float(np.max(dev, initial=0.0))}, [], base)

    if name == "Pos":
        x = _sample_points(rng, cfg.samples, kernel.dim, cfg.box_radius)
        kx = kernel(x)
        zero = kx == 0.0
        if np.any(zero):
            i = int(np.flatnonzero(zero)[0])
            return CertificateReport(hypothesis, "fails", {},
                                     [{"x": x[i].tolist(), "K(x)": 0.0}], base)
        finite = np.isfinite(kx)
        if not np.any(finite):
            return CertificateReport(hypothesis, "inconclusive", {}, [], base)
        return CertificateReport(hypothesis, "holds", {"min_sampled": float(np.min(kx[finite]))}, [], base)

    if name == "Inf":
        r = cfg.inf_radius
        if r is None:
            r = min(1.0, kernel.support_radius / 2.0) if math.isfinite(kernel.support_radius) else 1.0
        x = _sample_points(rng, cfg.samples, kernel.dim, r)
        inside = np.sqrt(np.sum(x * x, axis=-1)) < r
        x = x[inside]
        if len(x) == 0:
            return CertificateReport(hypothesis, "inconclusive", {"r": r}, [], base)
        kx = kernel(x)
        zero = kx == 0.0
        if np.any(zero):
            i = int(np.flatnonzero(zero)[0])
            return CertificateReport(hypothesis, "fails", {"r": r, "mu": 0.0},
                                     [{"x": x[i].tolist(), "K(x)": 0.0}], base)
        finite = np.isfinite(kx)
        mu = float(np.min(kx[finite])) if np.any(finite) else math.inf
        return CertificateReport(hypothesis, "holds", {"r": r, "mu": mu}, [], base)

    raise AssertionError("unreachable")
