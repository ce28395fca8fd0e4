import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convsemi import test_functions as tf
from convsemi.kernel_algebra import ExpWeighted, FractionalJ, Grid, HeatBoundary, Heaviside, Indicator01

# [DERIVED] 30-digit quadrature, frozen
STANDARD_BUMP_INTEGRAL = 0.443993816168079437823048921171
WEYL_HALF_STANDARD_AT_07 = 0.126636929303869147877693652804  # W_{1/2} bump at t = 0.7

FAST = settings(max_examples=20, deadline=None)
bumps = st.builds(
    tf.TestFunction,
    center=st.floats(0.3, 1.2),
    half_width=st.floats(0.15, 0.6),
    poly=st.tuples(st.floats(0.5, 2.0), st.floats(-0.5, 0.5)),
)


@pytest.fixture(scope="module")
def grid():
    return Grid.from_horizon(1e-3, 3.0)


def test_standard_bump_integral(grid):
    v = tf.STANDARD_BUMP(grid.t)
    assert grid.dt * v.sum() == pytest.approx(STANDARD_BUMP_INTEGRAL, abs=1e-12)


def test_bump_validation():
    with pytest.raises(ValueError):
        tf.TestFunction(0.5, 0.0)
    with pytest.raises(ValueError):
        tf.TestFunction(-1.0, 0.5)


@FAST
@given(f=bumps)
def test_derivative_matches_finite_difference(f):
    t = np.linspace(f.support_start, f.support_end, 41)[1:-1]
    h = 1e-5
    fd = (f(t + h) - f(t - h)) / (2 * h)
    assert np.abs(f.eval(t, 1) - fd).max() < 1e-5 * max(1.0, np.abs(fd).max())


@FAST
@given(f=bumps, u=st.floats(-0.2, 0.2))
def test_shift_property(f, u):
    if f.support_end - u <= 0:
        return
    t = np.linspace(0, 2, 57)
    assert np.allclose(f.shift(u)(t), f(t + u), atol=1e-13)


@FAST
@given(f=bumps)
def test_record_roundtrip(f):
    assert tf.TestFunction.from_record(f.to_record()) == f


@FAST
@given(f=bumps)
def test_roundtrip_j1(f):
    g = Grid.from_horizon(1e-3, 2.5)
    k = FractionalJ(1.0)
    w = tf.solve_Wk(k, tf.apply_Tk(k, f, g))
    scale = max(1.0, np.abs(f.eval(g.t, 2)).max())
    assert np.abs(w.values - f(g.t)).max() < 10 * g.dt**1.5 * scale


@FAST
@given(f=bumps)
def test_support_preserved_exactly(f):
    g = Grid.from_horizon(1e-3, 2.5)
    for k in (FractionalJ(0.5), FractionalJ(1.5), Indicator01()):
        assert tf.solve_Wk(k, f, g).zero_scan() == 0.0


def test_weyl_half_frozen(grid):
    w = tf.weyl_derivative(tf.STANDARD_BUMP, 0.5, grid)
    assert w.at(0.7) == pytest.approx(WEYL_HALF_STANDARD_AT_07, abs=1e-5)


def test_weyl_integer_order_is_exact(grid):
    f = tf.TestFunction(0.8, 0.5, (1.0, 2.0))
    assert np.array_equal(tf.weyl_derivative(f, 2.0, grid).values, f.eval(grid.t, 2))


def test_weyl_twice_half_is_minus_derivative(grid):
    w = tf.weyl_iterate(tf.STANDARD_BUMP, 0.5, 2, grid)
    assert np.abs(w.values + tf.STANDARD_BUMP.eval(grid.t, 1)).max() < 1e-3


def test_support_must_be_inside(grid):
    with pytest.raises(ValueError, match="strictly inside"):
        tf.weyl_derivative(tf.TestFunction(2.5, 0.6), 0.5, grid)


def test_witness_returns_preimage(grid):
    g = tf.TestFunction(0.6, 0.3)
    w = tf.solve_Wk(Indicator01(), tf.Witnessed(g, Indicator01()), grid)
    assert np.array_equal(w.values, g(grid.t))


def test_exp_weighted_roundtrip(grid):
    k = ExpWeighted(-1.0, FractionalJ(0.5))
    f = tf.TestFunction(0.8, 0.5)
    w = tf.solve_Wk(k, tf.apply_Tk(k, f, grid))
    assert np.abs(w.values - f(grid.t)).max() < 10 * grid.dt**1.5


def test_ill_posed_kernel_refused(grid):
    with pytest.raises(ValueError, match="ill-posed"):
        tf.solve_Wk(HeatBoundary(1.0), tf.TestFunction(0.8, 0.5), grid)


def test_dk_norm_needs_beta_above_abscissa(grid):
    f = tf.TestFunction(0.8, 0.5)
    with pytest.raises(ValueError, match="beta"):
        tf.dk_norm(ExpWeighted(1.0, Heaviside()), f, 0.5, grid)
    assert tf.dk_norm(Heaviside(), f, 0.1, grid) > 0


@pytest.mark.parametrize("k", [FractionalJ(0.5), FractionalJ(1.0), Indicator01()])
def test_structure_identities(k, grid):
    rep = tf.wk_structure_check(k, FractionalJ(1.0), tf.TestFunction(0.8, 0.5), grid)
    assert rep.passed, rep.values


def test_structure_skips_ill_posed_components(grid):
    rep = tf.wk_structure_check(Indicator01(), HeatBoundary(1.0), tf.TestFunction(0.8, 0.5), grid)
    assert "factorization" in rep.values["skipped"]


def test_laplace_zero_of_heaviside(grid):
    # the tail of chi o e_1 needs about 28 time units to fall below 1e-12
    with pytest.raises(ValueError, match="too short"):
        tf.laplace_zero_check(Heaviside(), 1.0, grid)
    assert tf.laplace_zero_check(Heaviside(), 1.0, Grid.from_horizon(1e-2, 40.0)).passed


def test_two_step_kernel_zero():
    g = Grid.from_horizon(1e-3, 12.0)
    k = tf.two_step_kernel(g)
    lam0 = tf.find_laplace_zero(k, 6.2j, g)
    assert lam0 == pytest.approx(2j * math.pi, abs=1e-6)
    rep = tf.laplace_zero_check(k, lam0, g)
    assert rep.passed
