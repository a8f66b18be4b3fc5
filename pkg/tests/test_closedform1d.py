"""Interval perimeters via antiderivative profiles."""

import math
from dataclasses import replace

import numpy as np
import pytest

from nlperim.closedform1d import build_profile, interval_perimeter, perimeter_curve_report
from nlperim.grid import ball, make_grid, rasterize
from nlperim.functional import perimeter
from nlperim.kernels import (fractional_kernel, indicator_kernel, log_gamma_kernel,
                             oscillating_kernel, piecewise_fractional_kernel)
from nlperim.quadrature import kernel_integral


FRAC = fractional_kernel(1, 0.5)
IND = indicator_kernel(1, 1.0)


def test_fractional_profile_values():
    pf = build_profile(FRAC)
    # G(x) = -x^(-1/2)/(1/2), H(x) = -x^(1/2)/(1/4)
    assert pf.g(4.0) == pytest.approx(-1.0)
    assert pf.h_fn(4.0) == pytest.approx(-8.0)
    assert pf.g_inf == 0.0
    assert pf.h_zero == 0.0


def test_indicator_profile_piecewise():
    pi = build_profile(IND)
    assert pi.g(0.5) == pytest.approx(0.5)
    assert pi.g(3.0) == pytest.approx(1.0)
    assert pi.h_fn(0.5) == pytest.approx(0.125)
    assert pi.h_fn(2.0) == pytest.approx(2.0 - 0.5)
    assert pi.g_inf == pytest.approx(1.0)


def test_fractional_interval_perimeters_exact():
    pf = build_profile(FRAC)
    assert interval_perimeter(pf, 0.5) == pytest.approx(8.0, rel=1e-12)
    assert interval_perimeter(pf, 2.0) == pytest.approx(16.0, rel=1e-12)


def test_indicator_interval_perimeter():
    pi = build_profile(IND)
    # 2*(2*1*(1/2) + 0 - H(1)) = 2*(1 - 1/2)
    assert interval_perimeter(pi, 0.5) == pytest.approx(1.0, rel=1e-12)


def test_numeric_profile_matches_analytic_fractional():
    # force the quadrature fallback by renaming the family
    k = replace(FRAC, family="custom")
    num = build_profile(k)
    ana = build_profile(FRAC)
    # align the integration constants: both use differences of G only
    shift = num.g(1.0) - ana.g(1.0)
    for x in np.geomspace(0.01, 10.0, 30):
        assert num.g(float(x)) - shift == pytest.approx(ana.g(float(x)),
                                                        rel=5e-3, abs=5e-4)
    for r in (0.1, 0.5, 2.0, 4.0):
        assert interval_perimeter(num, r) == pytest.approx(interval_perimeter(ana, r),
                                                           rel=5e-3)


def test_formula_invariant_under_base_point_and_constant():
    k = replace(FRAC, family="custom")
    a = build_profile(k, x0=1.0, c=0.0)
    b = build_profile(k, x0=2.0, c=5.0)
    for r in (0.25, 1.0, 3.0):
        assert interval_perimeter(a, r) == pytest.approx(interval_perimeter(b, r),
                                                         rel=1e-4)


def test_profile_rejects_non_far_kernel():
    from nlperim.kernels import Kernel, RadialProfile, euclidean_norm, _guard_singular, _radial_from_profile
    prof = _guard_singular(lambda t: 1.0 / t)
    nrm = euclidean_norm(1)
    k = Kernel(dim=1, fn=_radial_from_profile(1, prof, nrm),
               radial=RadialProfile(norm=nrm, profile=prof, nonincreasing=True))
    with pytest.raises(ValueError):
        build_profile(k)


def test_infinite_perimeter_sentinel_for_strong_singularity():
    # s*p = 1 pushes H(0+) to infinity: intervals have infinite perimeter
    k = fractional_kernel(1, 0.5, p=2.0)
    profile = build_profile(k)
    assert profile.h_zero == math.inf
    assert interval_perimeter(profile, 0.5) == math.inf


def test_profile_monotonicity_and_convexity_sampled():
    for kernel in (FRAC, IND, log_gamma_kernel(1.5)):
        profile = build_profile(kernel)
        xs = np.geomspace(0.02, 4.0, 40)
        g_vals = [profile.g(float(x)) for x in xs]
        assert all(b >= a - 1e-10 for a, b in zip(g_vals, g_vals[1:]))
        h_vals = [profile.h_fn(float(x)) for x in xs]
        # convexity via second differences on the log-spaced triples
        for i in range(1, len(xs) - 1):
            lam = (xs[i] - xs[i - 1]) / (xs[i + 1] - xs[i - 1])
            chord = (1 - lam) * h_vals[i - 1] + lam * h_vals[i + 1]
            assert h_vals[i] <= chord + 1e-8 * (1 + abs(chord))


def test_numeric_g_matches_kernel_integral():
    k = oscillating_kernel(1, 0.5, 1.0, 3.0, 2)
    profile = build_profile(k)
    # G(b) - G(a) must equal the one-sided kernel mass of (a, b)
    a, b = 0.5, 3.5
    mass = kernel_integral(k, ("annulus", a, b))
    assert profile.g(b) - profile.g(a) == pytest.approx(0.5 * mass.value, rel=1e-6)


def test_curve_report_fractional():
    report = perimeter_curve_report(build_profile(FRAC), np.linspace(0.1, 5.0, 20))
    assert report.monotone and report.concave and report.c1_consistent
    assert not report.eventually_constant


def test_curve_report_log_kernel_eventually_constant():
    report = perimeter_curve_report(build_profile(log_gamma_kernel(1.0)),
                                    np.linspace(0.02, 0.5, 25))
    assert report.monotone and report.concave
    assert report.eventually_constant
    # the plateau starts once the interval diameter covers the support
    flat = [p for r, p in zip(report.radii, report.perimeters) if r >= 1.0 / 6.0 + 0.02]
    assert max(flat) - min(flat) <= 1e-9


def test_curve_report_indicator_quadratic_then_constant():
    report = perimeter_curve_report(build_profile(IND), np.linspace(0.05, 1.5, 25))
    assert report.monotone and report.concave
    assert report.eventually_constant
    plateau = [p for r, p in zip(report.radii, report.perimeters) if r >= 0.55]
    assert plateau[0] == pytest.approx(1.0, rel=1e-12)


def test_closed_form_matches_grid_perimeter_for_zoo():
    kernels = [FRAC, IND, piecewise_fractional_kernel(1, [0.3, 0.6], [2.0, 1.0], [1.5]),
               oscillating_kernel(1, 0.5, 1.0, 3.0, 2)]
    h = 2.0 ** -9
    for kernel in kernels:
        profile = build_profile(kernel)
        for r in (0.3, 0.8):
            expected = interval_perimeter(profile, r)
            g = make_grid(1, h, [-r - 4 * h], [r + 4 * h])
            e = rasterize(g, ball(r, [0.0]))
            got = perimeter(e, kernel).value
            assert got == pytest.approx(expected, rel=0.05)
