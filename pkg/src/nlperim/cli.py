"""Command-line front door: parse specs, run evaluations, emit artifacts.

Every command writes JSON reports (and CSV curves where applicable) into the
output directory, prints a one-line summary, and exits 0 on pass/holds, 2 on
fails, 3 on inconclusive, 1 on usage or format errors.  Artifacts embed the
seed and a hash of the canonical run configuration, and identical
configurations produce byte-identical outputs.  The environment variable
NLPERIM_WORKERS caps the worker count of parallel sections (absent: all
cores); results do not depend on it.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import closedform1d, extension, functional, grid as gridmod, isoperimetry, kernels
from .certify import SamplingConfig, certify as run_certify
from .functional import QuadratureScheme
from .kernels import SpecFormatError, parse_keyvalue
from .quadrature import kernel_integral


EXIT_PASS, EXIT_USAGE, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3


def worker_count() -> int:
    """Worker cap from NLPERIM_WORKERS; defaults to all cores."""
    raw = os.environ.get("NLPERIM_WORKERS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        return os.cpu_count() or 1


class RunConfig:
    """Flat key/value run configuration with a lossless text form."""

    def __init__(self, values: dict):
        self.values = {str(k): str(v) for k, v in values.items()}

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls(parse_keyvalue(text))

    def to_text(self) -> str:
        return "".join(f"{k} = {self.values[k]}\n" for k in sorted(self.values))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def _enc(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, (np.floating, np.integer)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def write_json(path: Path, payload: dict, config: RunConfig, seed) -> None:
    body = dict(payload)
    body["config_hash"] = config.config_hash
    body["seed"] = seed
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(body, fh, sort_keys=True, indent=1, default=_enc)
        fh.write("\n")


def write_curve_csv(path: Path, header, rows, config: RunConfig, seed) -> None:
    """Two-or-more-column CSV with a stable column order and embedded config."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# config {config.config_hash} seed {seed}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("inf" if isinstance(v, float) and math.isinf(v)
                              else repr(float(v)) if isinstance(v, (int, float, np.floating))
                              else str(v) for v in row) + "\n")


def _floats(text: str):
    return [float(tok) for tok in text.replace(",", " ").split()]


def _load_kernel(path: str) -> kernels.Kernel:
    with open(path) as fh:
        return kernels.construct(fh.read())


def _scheme_from_args(args) -> QuadratureScheme:
    return QuadratureScheme(near_field=args.near_field,
                            near_shells=args.near_shells,
                            cutoff_radius=args.cutoff_radius,
                            tail_compensation=not args.no_tail)


def _config_from_args(args, command: str) -> RunConfig:
    keep = {}
    for key, val in sorted(vars(args).items()):
        if key in ("func", "out"):
            continue
        if val is not None:
            keep[key] = val
    keep["command"] = command
    return RunConfig(keep)


def _verdict_exit(verdict: str) -> int:
    return {"holds": EXIT_PASS, "pass": EXIT_PASS, "fails": EXIT_FAIL,
            "fail": EXIT_FAIL}.get(verdict, EXIT_INCONCLUSIVE)


# --------------------------------------------------------------------------
# Command implementations
# --------------------------------------------------------------------------

def _cmd_certify(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    norm = kernels.norm_from_spec({"norm": args.norm, "norm_p": str(args.norm_p),
                                   "norm_weights": args.norm_weights or ""}, kernel.dim)
    cfg = SamplingConfig(seed=args.seed, samples=args.samples, box_radius=args.box_radius,
                         doubling_bound=args.doubling_bound, nts_p=args.nts_p)
    report = run_certify(kernel, args.hypothesis, norm=norm, cfg=cfg)
    write_json(out / f"certificate_{args.hypothesis}.json",
               json.loads(report.to_json()), config, args.seed)
    print(f"certify {args.hypothesis}: {report.verdict} {report.constants}")
    return _verdict_exit(report.verdict)


def _cmd_integral(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    weight = args.weight_p if args.weight_p is not None else None
    res = kernel_integral(kernel, args.region, r=args.radius, weight=weight)
    write_json(out / "integral.json",
               {"value": res.value, "error": res.error, "status": res.status,
                "region": args.region, "radius": args.radius, "weight_p": args.weight_p},
               config, args.seed)
    print(f"integral {args.region}: {res.value} ({res.status})")
    return EXIT_PASS if res.status != "inconclusive" else EXIT_INCONCLUSIVE


def _cmd_seminorm(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    u = gridmod.load_grid_function(args.function)
    omega = gridmod.load_grid_set(args.omega) if args.omega else None
    rep = functional.seminorm(u, kernel, p=args.p, region=omega,
                              scheme=_scheme_from_args(args))
    write_json(out / "seminorm.json", json.loads(rep.to_json()), config, args.seed)
    print(f"seminorm^p: {rep.value} (error {rep.error})")
    return EXIT_PASS


def _cmd_perimeter(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    e = gridmod.load_grid_set(args.set)
    omega = gridmod.load_grid_set(args.omega) if args.omega else None
    rep = functional.perimeter(e, kernel, omega=omega, scheme=_scheme_from_args(args))
    write_json(out / "perimeter.json", json.loads(rep.to_json()), config, args.seed)
    print(f"perimeter: {rep.value} (error {rep.error})")
    return EXIT_PASS


def _cmd_energy(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    e = gridmod.load_grid_set(args.set)
    payload = {}
    if args.method in ("direct", "both"):
        rep = functional.interaction_energy(e, kernel, method="direct")
        payload["direct"] = json.loads(rep.to_json())
    if args.method in ("fft", "both"):
        rep = functional.interaction_energy(e, kernel, method="fft")
        payload["fft"] = json.loads(rep.to_json())
    if args.method == "both":
        a = payload["direct"]["value"]
        b = payload["fft"]["value"]
        payload["relative_difference"] = abs(a - b) / max(abs(a), 1e-300)
    write_json(out / "energy.json", payload, config, args.seed)
    shown = payload.get("direct") or payload.get("fft")
    print(f"interaction energy ({args.method}): {shown['value']}")
    return EXIT_PASS


def _cmd_curvature(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    e = gridmod.load_grid_set(args.set)
    res = functional.curvature(e, _floats(args.point), kernel)
    write_json(out / "curvature.json",
               {"value": res.value, "error": res.error, "status": res.status,
                "epsilons": res.epsilons, "iterates": res.iterates}, config, args.seed)
    write_curve_csv(out / "curvature_iterates.csv", ["epsilon", "iterate"],
                    list(zip(res.epsilons, res.iterates)), config, args.seed)
    print(f"curvature: {res.value} +/- {res.error} ({res.status})")
    return EXIT_PASS if res.status == "ok" else EXIT_INCONCLUSIVE


def _cmd_closedform(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    profile = closedform1d.build_profile(kernel)
    radii = _floats(args.radii)
    report = closedform1d.perimeter_curve_report(profile, radii)
    diffs = report.first_differences + [math.nan]
    second = [math.nan] + report.second_differences + [math.nan]
    rows = [(r, p, d1, d2) for r, p, d1, d2 in
            zip(report.radii, report.perimeters, diffs, second)]
    write_curve_csv(out / "closedform.csv",
                    ["radius", "perimeter", "first_difference", "second_difference"],
                    rows, config, args.seed)
    write_json(out / "closedform.json", {"verdicts": report.verdicts(),
                                         "provenance": profile.provenance},
               config, args.seed)
    ok = report.monotone and report.concave
    print(f"closedform: monotone={report.monotone} concave={report.concave} "
          f"eventually_constant={report.eventually_constant}")
    return EXIT_PASS if ok else EXIT_FAIL


def _cmd_extend(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    u = gridmod.load_grid_function(args.function)
    lo = _floats(args.box_lo)
    hi = _floats(args.box_hi)
    domain = extension.BoxDomain(grid=u.grid, boxes=((tuple(lo), tuple(hi)),),
                                 collar=args.collar)
    ext, report = extension.extend(u, domain, kernel, p=args.p,
                                   scheme=_scheme_from_args(args))
    gridmod.save_grid_function(out / "extended.grid", ext)
    write_json(out / "extension.json", json.loads(report.to_json()), config, args.seed)
    print(f"extend: ratio {report.ratio}")
    return EXIT_PASS


def _cmd_ballcurve(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    points, ok = isoperimetry.ball_curve(kernel, _floats(args.radii), h=args.h,
                                         scheme=_scheme_from_args(args))
    rows = [(r, rep.value, rep.error) for r, rep in points]
    write_curve_csv(out / "ballcurve.csv", ["radius", "perimeter", "error"],
                    rows, config, args.seed)
    write_json(out / "ballcurve.json", {"monotone": ok}, config, args.seed)
    print(f"ball curve: monotone={ok}")
    return EXIT_PASS if ok else EXIT_FAIL


def _cmd_optimize(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    lo = _floats(args.box_lo)
    hi = _floats(args.box_hi)
    g = gridmod.make_grid(kernel.dim, args.h, lo, hi)
    target_cells = max(1, int(round(args.volume / g.cell_volume)))
    if args.init == "ball":
        radius = isoperimetry.ball_volume_radius(kernel.dim, args.volume)
        init = gridmod.rasterize(g, gridmod.ball(radius, [0.0] * kernel.dim))
        init = isoperimetry._match_count(init, target_cells, [0.0] * kernel.dim)
    elif args.init == "random":
        rng = np.random.default_rng(args.seed)
        flat = np.zeros(g.n_cells, dtype=bool)
        flat[rng.choice(g.n_cells, target_cells, replace=False)] = True
        init = gridmod.GridSet(g, flat.reshape(g.shape))
    else:
        init = gridmod.load_grid_set(args.init)
    result = isoperimetry.optimize(kernel, args.volume, args.mode, init,
                                   seed=args.seed, max_moves=args.max_moves,
                                   scheme=_scheme_from_args(args))
    gridmod.save_grid_set(out / "best_set.grid", result.best)
    write_curve_csv(out / "energy_trace.csv", ["move", "perimeter"], result.trace,
                    config, args.seed)
    write_json(out / "shape.json", json.loads(result.to_json()), config, args.seed)
    print(f"optimize: profile estimate {result.profile_estimate} "
          f"({result.accepted} accepted moves)")
    return EXIT_PASS


def _cmd_counterexample(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    rep = isoperimetry.two_ball_counterexample(kernel, args.delta, args.r,
                                               _floats(args.x0), h=args.h)
    write_json(out / "counterexample.json", json.loads(rep.to_json()), config, args.seed)
    print(f"counterexample: {rep.verdict} (P_two + margin = {rep.lhs} "
          f"vs P_ball = {rep.rhs})")
    return _verdict_exit(rep.verdict)


def _cmd_poincare(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    omega = gridmod.load_grid_set(args.omega)
    rep = isoperimetry.poincare_constant(omega, kernel, p=args.p, mode=args.mode,
                                         seed=args.seed,
                                         scheme=_scheme_from_args(args))
    write_json(out / "poincare.json", json.loads(rep.to_json()), config, args.seed)
    print(f"poincare ({args.mode}): constant {rep.constant} ({rep.verdict})")
    return _verdict_exit(rep.verdict)


def _cmd_sobolev(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    rep = isoperimetry.sobolev_assumption_check(kernel, args.q, _floats(args.masses))
    rows = list(zip(rep.details["masses"], rep.details["rho"]))
    write_curve_csv(out / "sobolev.csv", ["mass", "rho"], rows, config, args.seed)
    write_json(out / "sobolev.json", json.loads(rep.to_json()), config, args.seed)
    print(f"sobolev check: {rep.verdict} (constant {rep.constant})")
    return _verdict_exit(rep.verdict)


def _cmd_reliso(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    e = gridmod.load_grid_set(args.set)
    omega = gridmod.load_grid_set(args.omega)
    rep = isoperimetry.relative_isoperimetric_check(e, omega, kernel, args.q,
                                                    scheme=_scheme_from_args(args))
    write_json(out / "rel_iso.json", json.loads(rep.to_json()), config, args.seed)
    print(f"relative isoperimetric: {rep.verdict} (implied constant {rep.constant})")
    return _verdict_exit(rep.verdict)


def _cmd_probe(args, out: Path, config: RunConfig) -> int:
    kernel = _load_kernel(args.kernel)
    u = gridmod.load_grid_function(args.function)
    res = functional.divergence_probe(u, kernel, p=args.p)
    rows = list(zip(range(len(res.radii)), res.radii, res.partials))
    write_curve_csv(out / "probe.csv", ["shell", "radius", "partial_seminorm"],
                    rows, config, args.seed)
    write_json(out / "probe.json",
               {"growth_ratio": res.growth_ratio, "tail_cauchy": res.tail_cauchy(),
                "levels": len(res.radii)}, config, args.seed)
    print(f"probe: growth ratio {res.growth_ratio}, tail cauchy {res.tail_cauchy()}")
    return EXIT_PASS


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _add_common(sp, kernel_required=True):
    sp.add_argument("--kernel", required=kernel_required, help="kernel spec file")
    sp.add_argument("--out", default="out", help="output directory")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--near-field", default="analytic-fractional-correction",
                    choices=["analytic-fractional-correction", "exclude-diagonal-cell"])
    sp.add_argument("--near-shells", type=int, default=3)
    sp.add_argument("--cutoff-radius", type=float, default=None)
    sp.add_argument("--no-tail", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlperim",
                                 description="Non-local seminorm and perimeter laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("certify", help="certify a kernel hypothesis")
    _add_common(sp)
    sp.add_argument("--hypothesis", required=True)
    sp.add_argument("--samples", type=int, default=4000)
    sp.add_argument("--box-radius", type=float, default=4.0)
    sp.add_argument("--doubling-bound", type=float, default=None)
    sp.add_argument("--nts-p", type=float, default=1.0)
    sp.add_argument("--norm", default="euclidean")
    sp.add_argument("--norm-p", type=float, default=2.0)
    sp.add_argument("--norm-weights", default=None)
    sp.set_defaults(func=_cmd_certify)

    sp = sub.add_parser("integral", help="kernel integral over a region")
    _add_common(sp)
    sp.add_argument("--region", default="all", choices=["all", "tail", "ball"])
    sp.add_argument("--radius", type=float, default=None)
    sp.add_argument("--weight-p", type=float, default=None)
    sp.set_defaults(func=_cmd_integral)

    sp = sub.add_parser("seminorm", help="seminorm of a grid function")
    _add_common(sp)
    sp.add_argument("--function", required=True)
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--omega", default=None)
    sp.set_defaults(func=_cmd_seminorm)

    sp = sub.add_parser("perimeter", help="perimeter of a grid set")
    _add_common(sp)
    sp.add_argument("--set", required=True)
    sp.add_argument("--omega", default=None)
    sp.set_defaults(func=_cmd_perimeter)

    sp = sub.add_parser("energy", help="interaction energy of a grid set")
    _add_common(sp)
    sp.add_argument("--set", required=True)
    sp.add_argument("--method", default="direct", choices=["direct", "fft", "both"])
    sp.set_defaults(func=_cmd_energy)

    sp = sub.add_parser("curvature", help="non-local curvature at a boundary point")
    _add_common(sp)
    sp.add_argument("--set", required=True)
    sp.add_argument("--point", required=True)
    sp.set_defaults(func=_cmd_curvature)

    sp = sub.add_parser("closedform", help="interval perimeter curve (1D)")
    _add_common(sp)
    sp.add_argument("--radii", required=True)
    sp.set_defaults(func=_cmd_closedform)

    sp = sub.add_parser("extend", help="extension operator on a box domain")
    _add_common(sp)
    sp.add_argument("--function", required=True)
    sp.add_argument("--box-lo", required=True)
    sp.add_argument("--box-hi", required=True)
    sp.add_argument("--collar", type=float, required=True)
    sp.add_argument("--p", type=float, default=1.0)
    sp.set_defaults(func=_cmd_extend)

    sp = sub.add_parser("ballcurve", help="ball perimeter curve")
    _add_common(sp)
    sp.add_argument("--radii", required=True)
    sp.add_argument("--h", type=float, required=True)
    sp.set_defaults(func=_cmd_ballcurve)

    sp = sub.add_parser("optimize", help="volume-constrained shape optimization")
    _add_common(sp)
    sp.add_argument("--volume", type=float, required=True)
    sp.add_argument("--mode", default="greedy", choices=["greedy", "anneal"])
    sp.add_argument("--h", type=float, required=True)
    sp.add_argument("--box-lo", required=True)
    sp.add_argument("--box-hi", required=True)
    sp.add_argument("--init", default="ball",
                    help="'ball', 'random', or a grid set file")
    sp.add_argument("--max-moves", type=int, default=4000)
    sp.set_defaults(func=_cmd_optimize)

    sp = sub.add_parser("counterexample", help="two-ball perimeter counterexample")
    _add_common(sp)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--r", type=float, required=True)
    sp.add_argument("--x0", required=True)
    sp.add_argument("--h", type=float, default=None)
    sp.set_defaults(func=_cmd_counterexample)

    sp = sub.add_parser("poincare", help="mean-oscillation constant estimate")
    _add_common(sp)
    sp.add_argument("--omega", required=True)
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--mode", default="rayleigh-min",
                    choices=["rayleigh-min", "remark-bound"])
    sp.set_defaults(func=_cmd_poincare)

    sp = sub.add_parser("sobolev-check", help="volume-growth assumption check")
    _add_common(sp)
    sp.add_argument("--q", type=float, required=True)
    sp.add_argument("--masses", required=True)
    sp.set_defaults(func=_cmd_sobolev)

    sp = sub.add_parser("rel-iso", help="relative isoperimetric inequality")
    _add_common(sp)
    sp.add_argument("--set", required=True)
    sp.add_argument("--omega", required=True)
    sp.add_argument("--q", type=float, required=True)
    sp.set_defaults(func=_cmd_reliso)

    sp = sub.add_parser("probe", help="divergence probe over expanding shells")
    _add_common(sp)
    sp.add_argument("--function", required=True)
    sp.add_argument("--p", type=float, default=1.0)
    sp.set_defaults(func=_cmd_probe)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0,) else 0
    out = Path(args.out)
    config = _config_from_args(args, args.command)
    try:
        return args.func(args, out, config)
    except SpecFormatError as exc:
        print(f"error: malformed specification: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
