"""Kernel construction, transforms, integrals, and hypothesis certification."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlperim.certify import SamplingConfig, certify
from nlperim.grid import GridFunction, make_grid
from nlperim.functional import seminorm
from nlperim.kernels import (SpecFormatError, construct, ell_p_norm, euclidean_norm,
                             fractional_kernel, gaussian_kernel, indicator_kernel,
                             log_fractional_kernel, log_gamma_kernel,
                             oscillating_kernel, parse_keyvalue,
                             piecewise_fractional_kernel, symmetrize, truncate,
                             weighted_norm)
from nlperim.quadrature import kernel_integral


# --------------------------------------------------------------------------
# Norms
# --------------------------------------------------------------------------

def test_norm_equivalence_constants_hold_on_samples(rng):
    for norm in (euclidean_norm(3), ell_p_norm(3, 1.0), ell_p_norm(3, 4.0),
                 weighted_norm([0.5, 2.0, 1.0])):
        pts = rng.standard_normal((500, 3))
        star = norm.value(pts)
        eucl = np.sqrt(np.sum(pts * pts, axis=-1))
        assert np.all(star >= norm.lower * eucl - 1e-12)
        assert np.all(star <= norm.upper * eucl + 1e-12)


def test_norm_homogeneity_and_triangle(rng):
    norm = ell_p_norm(2, 3.0)
    x = rng.standard_normal((200, 2))
    y = rng.standard_normal((200, 2))
    assert np.allclose(norm.value(2.5 * x), 2.5 * norm.value(x))
    assert np.all(norm.value(x + y) <= norm.value(x) + norm.value(y) + 1e-12)


def test_ell_p_unit_ball_volume_matches_monte_carlo():
    norm = ell_p_norm(2, 1.0)
    # the cross-polytope in 2D has area 2
    assert norm.unit_ball_volume() == pytest.approx(2.0, rel=1e-12)


# --------------------------------------------------------------------------
# Construction
# --------------------------------------------------------------------------

def test_fractional_pointwise_value():
    k = fractional_kernel(1, 0.5)
    # |z|^(-d-sp) at z=2 with d=1, s=0.5, p=1
    assert k(np.array([2.0])) == pytest.approx(2.0 ** -1.5, rel=1e-12)
    assert k(np.array([2.0])) == pytest.approx(0.353553, abs=1e-6)


def test_single_piece_degenerates_to_fractional(rng):
    plain = fractional_kernel(1, 0.4)
    pw = piecewise_fractional_kernel(1, [0.4], [1.0], [])
    z = rng.uniform(-5, 5, size=(200, 1))
    z = z[np.abs(z[:, 0]) > 1e-6]
    assert np.allclose(plain(z), pw(z), rtol=1e-12)


def test_log_gamma_with_unit_exponent_is_inverse_distance():
    k = log_gamma_kernel(1.0)
    inside = np.array([[0.1], [-0.2], [0.3]])
    assert np.allclose(k(inside), 1.0 / np.abs(inside[:, 0]))
    outside = np.array([[0.4], [-2.0]])
    assert np.all(k(outside) == 0.0)


def test_construct_parameter_validation():
    with pytest.raises(ValueError):
        fractional_kernel(1, 1.5)
    with pytest.raises(ValueError):
        oscillating_kernel(1, 0.5, 3.0, 1.0, 2)       # needs alpha < beta
    with pytest.raises(ValueError):
        piecewise_fractional_kernel(1, [0.3, 0.5], [1.0, 2.0], [1.5])  # alpha increasing
    with pytest.raises(ValueError):
        piecewise_fractional_kernel(1, [0.5, 0.3], [2.0, 1.0], [1.5])  # s decreasing


def test_construct_from_text_and_diagnostics():
    k = construct("family = fractional\nd = 1\ns = 0.5\n# comment\n")
    assert k.family == "fractional"
    with pytest.raises(SpecFormatError) as err:
        parse_keyvalue("family = fractional\nnonsense line\n")
    assert "line 2" in str(err.value)
    with pytest.raises(ValueError):
        construct("family = nosuch\nd = 1\n")


def test_singular_kernels_return_inf_at_origin():
    k = fractional_kernel(2, 0.5)
    assert math.isinf(k(np.zeros(2)))
    capped = truncate(k, "cap", 10.0)
    assert capped(np.zeros(2)) == 10.0


# --------------------------------------------------------------------------
# Transforms
# --------------------------------------------------------------------------

def test_symmetrize_formula_and_idempotence(rng):
    def one_sided(pts):
        z = pts[:, 0]
        return np.where(z > 0, np.exp(-z), 0.0)

    from nlperim.kernels import Kernel
    k = Kernel(dim=1, fn=one_sided, singular_set="none", symmetric=False)
    ks = symmetrize(k)
    z = rng.uniform(-3, 3, size=(100, 1))
    assert np.allclose(ks(z), 0.5 * np.exp(-np.abs(z[:, 0])))
    kss = symmetrize(ks)
    assert np.allclose(kss(z), ks(z))


def test_seminorm_invariant_under_symmetrization(rng):
    # discrete sums agree exactly for any kernel and function
    def one_sided(pts):
        z = pts[:, 0]
        return np.where(z > 0, 1.0 / (1.0 + z * z), 0.1)

    from nlperim.kernels import Kernel
    k = Kernel(dim=1, fn=one_sided, singular_set="none", symmetric=False)
    ks = symmetrize(k)
    g = make_grid(1, 0.1, [-1.0], [1.0])
    u = GridFunction(g, rng.standard_normal(g.shape))
    a = seminorm(u, k, p=1.0, region=None).value
    b = seminorm(u, ks, p=1.0, region=None).value
    assert a == pytest.approx(b, rel=1e-12)


def test_truncate_outside_ball():
    k = truncate(fractional_kernel(1, 0.5), "outside-ball", 1.0)
    assert k(np.array([0.5])) == 0.0
    assert k(np.array([2.0])) == pytest.approx(2.0 ** -1.5)
    # both names select the same restriction
    k2 = truncate(fractional_kernel(1, 0.5), "annulus-exclude", 1.0)
    assert k2(np.array([0.5])) == 0.0


def test_truncated_tail_mass_is_analytic_value():
    k = truncate(fractional_kernel(1, 0.5), "outside-ball", 1.0)
    res = kernel_integral(k, "all")
    # 2 * int_1^inf z^-1.5 dz = 4
    assert res.value == pytest.approx(4.0, rel=1e-6)


def test_cap_returns_kernel_below_threshold():
    k = fractional_kernel(1, 0.5)
    capped = truncate(k, "cap", 5.0)
    z = np.array([[2.0]])
    assert capped(z)[0] == k(z)[0]
    assert capped(np.array([[1e-4]]))[0] == 5.0


# --------------------------------------------------------------------------
# Integrals
# --------------------------------------------------------------------------

def test_fractional_tail_and_weighted_mass():
    k = fractional_kernel(1, 0.5)
    tail = kernel_integral(k, "tail", 1.0)
    assert tail.value == pytest.approx(4.0, rel=0.01)
    nts = kernel_integral(k, "all", weight=1.0)
    # 2 (int_0^1 z^-0.5 + int_1^inf z^-1.5) = 2 (2 + 2)
    assert nts.value == pytest.approx(8.0, rel=0.01)


def test_indicator_mass_is_exact():
    k = indicator_kernel(1, 1.0)
    res = kernel_integral(k, "all")
    assert res.value == pytest.approx(2.0, abs=1e-9)


def test_tail_mass_nonincreasing_in_radius():
    k = fractional_kernel(2, 0.3)
    values = [kernel_integral(k, "tail", r).value for r in (0.5, 1.0, 2.0, 4.0)]
    assert all(a >= b - 1e-9 for a, b in zip(values, values[1:]))


def test_divergence_detection():
    assert kernel_integral(fractional_kernel(1, 0.5), "all").status == "divergent"
    assert kernel_integral(log_gamma_kernel(1.0), "all").status == "divergent"
    assert kernel_integral(gaussian_kernel(2), "all").finite


@settings(max_examples=20, deadline=None)
@given(r=st.floats(min_value=0.1, max_value=5.0))
def test_tail_plus_ball_equals_total_for_integrable(r):
    k = indicator_kernel(1, 2.0)
    total = kernel_integral(k, "all").value
    tail = kernel_integral(k, "tail", r).value
    ballm = kernel_integral(k, "ball", r).value
    assert tail + ballm == pytest.approx(total, rel=1e-8)


# --------------------------------------------------------------------------
# Certification
# --------------------------------------------------------------------------

def test_certify_dec_radial_kernel():
    rep = certify(fractional_kernel(1, 0.5), "Dec")
    assert rep.verdict == "holds"
    assert rep.constants["c0"] >= 1.0 - 1e-9


def test_certify_dec_oscillating_constant():
    # profile kappa(|z|) * phi with phi in [beta - alpha, beta + alpha]
    k = oscillating_kernel(1, 0.5, 1.0, 3.0, 2)
    rep = certify(k, "Dec", cfg=SamplingConfig(seed=5, samples=20000, box_radius=2.5))
    assert rep.verdict == "holds"
    assert 0.45 <= rep.constants["c0"] <= 1.0


def test_certify_nint_indicator_fails_with_certificate():
    rep = certify(indicator_kernel(1, 1.0), "Nint")
    assert rep.verdict == "fails"
    assert rep.constants["integral"] == pytest.approx(2.0, abs=1e-9)
    assert rep.witnesses


def test_certify_dou_fractional_ratio():
    rep = certify(fractional_kernel(1, 0.5), "Dou",
                  cfg=SamplingConfig(seed=1, samples=4000, doubling_bound=1.0))
    assert rep.verdict == "holds"
    assert rep.constants["C_D"] == pytest.approx(2.0 ** 1.5, rel=1e-6)


def test_certify_dou_fails_past_support():
    # with D beyond half the support, doubling leaves the support: witness
    rep = certify(indicator_kernel(1, 1.0), "Dou",
                  cfg=SamplingConfig(seed=2, samples=2000, doubling_bound=0.9))
    assert rep.verdict == "fails"
    assert rep.witnesses


def test_certify_far_fails_for_slow_decay():
    from nlperim.kernels import Kernel, RadialProfile, _guard_singular, _radial_from_profile
    prof = _guard_singular(lambda t: 1.0 / t)
    nrm = euclidean_norm(1)
    k = Kernel(dim=1, fn=_radial_from_profile(1, prof, nrm),
               radial=RadialProfile(norm=nrm, profile=prof, nonincreasing=True))
    rep = certify(k, "Far")
    assert rep.verdict == "fails"
    rep2 = certify(fractional_kernel(1, 0.5), "Far")
    assert rep2.verdict == "holds"


def test_certify_sym_pos_inf():
    k = fractional_kernel(1, 0.5)
    assert certify(k, "Sym").verdict == "holds"
    assert certify(k, "Pos").verdict == "holds"
    rep = certify(k, "Inf")
    assert rep.verdict == "holds"
    assert rep.constants["mu"] > 0
    trunc = truncate(k, "outside-ball", 0.5)
    assert certify(trunc, "Pos").verdict == "fails"
    assert certify(trunc, "Inf").verdict == "fails"


def test_certify_nts_values():
    rep = certify(fractional_kernel(1, 0.5), "Nts", cfg=SamplingConfig(nts_p=1.0))
    assert rep.verdict == "holds"
    assert rep.constants["integral"] == pytest.approx(8.0, rel=0.01)


def test_certify_deterministic_given_seed():
    cfg = SamplingConfig(seed=77, samples=512)
    a = certify(oscillating_kernel(1, 0.5, 1.0, 3.0, 2), "Dec", cfg=cfg)
    b = certify(oscillating_kernel(1, 0.5, 1.0, 3.0, 2), "Dec", cfg=cfg)
    assert a.to_json() == b.to_json()


def test_certify_dec_generic_norm_bounded_modulation(rng):
    # kernel kappa(|z|_*) * phi(z) with phi in [alpha, beta] keeps c0 >= alpha/beta
    from nlperim.kernels import Kernel
    norm = ell_p_norm(2, 1.0)
    alpha, beta = 1.0, 2.0

    def fn(pts):
        t = norm.value(pts)
        base = np.where(t > 0, (1.0 + t) ** -3, np.inf)
        phi = alpha + (beta - alpha) * 0.5 * (1.0 + np.sin(3.0 * pts[..., 0]))
        return base * phi

    k = Kernel(dim=2, fn=fn, singular_set="none", symmetric=False)
    rep = certify(k, "Dec", norm=norm, cfg=SamplingConfig(seed=3, samples=20000))
    assert rep.verdict == "holds"
    assert rep.constants["c0"] >= alpha / beta - 1e-6
