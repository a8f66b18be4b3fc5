"""Grids, rasterization, discrete operators, rearrangement, file formats."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlperim.grid import (GridFunction, GridSet, ball, box, union, forward_difference,
                          load_grid_function, load_grid_set, make_grid, mean, mollify,
                          mollifier_stencil, rasterize, rearrange, save_grid_function,
                          save_grid_set)
from nlperim.kernels import fractional_kernel
from nlperim.functional import seminorm

from conftest import random_function


# --------------------------------------------------------------------------
# Rasterization
# --------------------------------------------------------------------------

def test_interval_volume():
    g = make_grid(1, 0.01, [-1.0], [1.0])
    e = rasterize(g, ball(0.5, [0.0]))
    assert abs(e.volume - 1.0) <= 0.01


def test_disc_volume_converges_to_pi():
    g = make_grid(2, 0.02, [-1.2, -1.2], [1.2, 1.2])
    e = rasterize(g, ball(1.0, [0.0, 0.0]))
    assert abs(e.volume - math.pi) <= 5 * 0.02


def test_disjoint_union_volume_additive():
    g = make_grid(1, 0.01, [0.0], [4.0])
    b1 = rasterize(g, box([0.5], [1.5]))
    b2 = rasterize(g, box([2.5], [3.0]))
    both = rasterize(g, union(box([0.5], [1.5]), box([2.5], [3.0])))
    assert both.count == b1.count + b2.count


def test_empty_rasterization_warns():
    g = make_grid(1, 0.1, [0.0], [1.0])
    with pytest.warns(UserWarning):
        rasterize(g, ball(0.01, [5.0]))


# --------------------------------------------------------------------------
# Forward differences
# --------------------------------------------------------------------------

def test_zero_shift_is_zero(rng):
    g = make_grid(2, 0.25, [0.0, 0.0], [1.0, 1.0])
    u = random_function(g, rng)
    d = forward_difference(u, [0.0, 0.0])
    assert np.all(d.values == 0.0)


def test_linear_function_gives_constant_difference():
    g = make_grid(1, 0.125, [0.0], [2.0])
    a = 3.0
    u = GridFunction(g, a * g.centers()[..., 0])
    d = forward_difference(u, [0.25])
    # interior cells see exactly a * shift; boundary cells hit the zero pad
    assert np.allclose(d.values[:-2], a * 0.25)


def test_difference_matches_elementwise_oracle(rng):
    g = make_grid(1, 0.5, [0.0], [4.0])
    u = random_function(g, rng)
    d = forward_difference(u, [1.0])  # two cells
    expect = np.zeros_like(u.values)
    expect[:-2] = u.values[2:] - u.values[:-2]
    expect[-2:] = -u.values[-2:]
    assert np.allclose(d.values, expect)


def test_non_multiple_shift_rejected(rng):
    g = make_grid(1, 0.5, [0.0], [4.0])
    u = random_function(g, rng)
    with pytest.raises(ValueError):
        forward_difference(u, [0.3])


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), shift=st.integers(-3, 3))
def test_forward_difference_linear(a, b, shift):
    g = make_grid(1, 0.5, [0.0], [4.0])
    rng = np.random.default_rng(5)
    u = GridFunction(g, rng.standard_normal(g.shape))
    v = GridFunction(g, rng.standard_normal(g.shape))
    combo = GridFunction(g, a * u.values + b * v.values)
    lhs = forward_difference(combo, [shift * 0.5]).values
    rhs = (a * forward_difference(u, [shift * 0.5]).values
           + b * forward_difference(v, [shift * 0.5]).values)
    assert np.allclose(lhs, rhs, atol=1e-12)


# --------------------------------------------------------------------------
# Mollification
# --------------------------------------------------------------------------

def test_mollifier_stencil_mass_one():
    offsets, weights = mollifier_stencil(2, 0.1, 0.35)
    assert weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(weights >= 0)


def test_constant_function_unchanged():
    g = make_grid(1, 0.1, [0.0], [2.0])
    u = GridFunction(g, np.full(g.shape, 2.5))
    m = mollify(u, 0.3)
    assert np.allclose(m.values[3:-3], 2.5)


def test_mollify_interval_indicator_mass_and_range(rng):
    g = make_grid(1, 0.02, [-2.0], [2.0])
    e = rasterize(g, ball(0.5, [0.0]))
    u = e.indicator()
    m = mollify(u, 0.1)
    assert np.all(m.values >= -1e-12) and np.all(m.values <= 1.0 + 1e-12)
    # mass preserved: support stays away from the box edge
    assert np.sum(m.values) == pytest.approx(np.sum(u.values), rel=1e-9)


def test_mollify_matches_direct_convolution_oracle(rng):
    g = make_grid(1, 0.1, [0.0], [3.0])
    u = random_function(g, rng)
    eps = 0.25
    offsets, weights = mollifier_stencil(1, 0.1, eps)
    n = g.shape[0]
    expect = np.zeros(n)
    for (k,), w in zip(offsets, weights):
        for i in range(n):
            j = i + k
            if 0 <= j < n:
                expect[i] += w * u.values[j]
    assert np.allclose(mollify(u, eps).values, expect, atol=1e-13)


def test_mollify_output_within_input_range(rng):
    g = make_grid(2, 0.1, [0.0, 0.0], [1.0, 1.0])
    u = random_function(g, rng)
    m = mollify(u, 0.2)
    assert np.min(m.values) >= np.min(np.minimum(u.values, 0.0)) - 1e-12
    assert np.max(m.values) <= np.max(np.maximum(u.values, 0.0)) + 1e-12


def test_mollify_seminorm_contraction(rng):
    g = make_grid(1, 1 / 64, [-1.0], [1.0])
    u = random_function(g, rng, interior_margin=16)
    k = fractional_kernel(1, 0.5)
    for p in (1.0, 2.0):
        before = seminorm(u, k, p=p, region=None).value
        after = seminorm(mollify(u, 4 / 64), k, p=p, region=None).value
        assert after <= before * (1.0 + 1e-8)


def test_mollify_rejects_radius_below_spacing(rng):
    g = make_grid(1, 0.1, [0.0], [1.0])
    with pytest.raises(ValueError):
        mollify(random_function(g, rng), 0.05)


# --------------------------------------------------------------------------
# Rearrangement
# --------------------------------------------------------------------------

def test_two_intervals_rearrange_to_one(rng):
    g = make_grid(1, 0.05, [-2.0], [2.0])
    e = rasterize(g, union(box([-1.5], [-1.0]), box([0.5], [1.0])))
    star = rearrange(e)
    assert star.count == e.count
    # occupied cells are exactly the nearest-to-origin cells
    centers = np.abs(g.centers()[..., 0])
    occupied = np.sort(centers[star.cells])
    everything = np.sort(centers.ravel())
    assert np.allclose(occupied, everything[: star.count])


def test_offcenter_ball_recenters(rng):
    g = make_grid(1, 0.05, [-2.0], [2.0])
    e = rasterize(g, ball(0.4, [1.0]))
    star = rearrange(e)
    assert star.count == e.count
    c = g.centers()[..., 0][star.cells]
    assert abs(np.mean(c)) < 0.05


def test_rearrange_idempotent_on_sets(rng):
    g = make_grid(2, 0.2, [-1.0, -1.0], [1.0, 1.0])
    cells = rng.random(g.shape) < 0.4
    e = GridSet(g, cells)
    once = rearrange(e)
    twice = rearrange(once)
    assert np.array_equal(once.cells, twice.cells)


def test_rearrange_function_multiset_and_monotone(rng):
    g = make_grid(1, 0.1, [-1.0], [1.0])
    u = GridFunction(g, rng.random(g.shape))
    star = rearrange(u)
    assert sorted(star.values.ravel()) == pytest.approx(sorted(u.values.ravel()))
    dist = np.abs(g.centers()[..., 0])
    order = np.argsort(dist, kind="stable")
    arranged = np.abs(star.values[order])
    assert np.all(np.diff(arranged) <= 1e-12)


@settings(max_examples=20, deadline=None)
@given(frac=st.floats(0.05, 0.95))
def test_rearrange_preserves_counts(frac):
    g = make_grid(2, 0.25, [-1.0, -1.0], [1.0, 1.0])
    rng = np.random.default_rng(11)
    e = GridSet(g, rng.random(g.shape) < frac)
    assert rearrange(e).count == e.count


# --------------------------------------------------------------------------
# Means
# --------------------------------------------------------------------------

def test_mean_of_constant(rng):
    g = make_grid(1, 0.1, [0.0], [1.0])
    om = rasterize(g, box([0.0], [1.0]))
    u = GridFunction(g, np.full(g.shape, 4.2))
    assert mean(u, om) == pytest.approx(4.2)


def test_indicator_mean_is_volume_fraction():
    g = make_grid(1, 0.01, [0.0], [1.0])
    om = rasterize(g, box([0.0], [1.0]))
    e = rasterize(g, box([0.0], [0.25]))
    assert mean(e.indicator(), om) == pytest.approx(e.count / om.count, rel=1e-12)


def test_mean_matches_naive_sum(rng):
    g = make_grid(2, 0.2, [0.0, 0.0], [1.0, 1.0])
    om = GridSet(g, rng.random(g.shape) < 0.7)
    u = random_function(g, rng)
    expect = sum(u.values[tuple(i)] for i in np.argwhere(om.cells)) / om.count
    assert mean(u, om) == pytest.approx(expect, rel=1e-12)


def test_mean_empty_region_rejected(rng):
    g = make_grid(1, 0.1, [0.0], [1.0])
    with pytest.raises(ValueError):
        mean(random_function(g, rng), GridSet(g, np.zeros(g.shape, dtype=bool)))


# --------------------------------------------------------------------------
# Files
# --------------------------------------------------------------------------

def test_function_file_roundtrip(tmp_path, rng):
    g = make_grid(2, 0.25, [-1.0, 0.0], [1.0, 1.0])
    u = random_function(g, rng)
    path = tmp_path / "u.grid"
    save_grid_function(path, u)
    v = load_grid_function(path)
    assert v.grid.shape == g.shape and v.grid.h == g.h
    assert np.array_equal(v.values, u.values)


def test_binary_roundtrip(tmp_path, rng):
    g = make_grid(1, 0.125, [0.0], [2.0])
    u = random_function(g, rng)
    path = tmp_path / "u.bgrid"
    save_grid_function(path, u, binary=True)
    v = load_grid_function(path)
    assert np.array_equal(v.values, u.values)


def test_set_file_roundtrip_and_validation(tmp_path, rng):
    g = make_grid(1, 0.1, [0.0], [1.0])
    e = GridSet(g, rng.random(g.shape) < 0.5)
    path = tmp_path / "e.grid"
    save_grid_set(path, e)
    f = load_grid_set(path)
    assert np.array_equal(f.cells, e.cells)
    save_grid_function(path, GridFunction(g, 0.5 * np.ones(g.shape)))
    with pytest.raises(ValueError):
        load_grid_set(path)
