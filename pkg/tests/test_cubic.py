"""Cubic/spline kernel: exact double integration and integrals."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from semode import DomainError, PiecewiseLinear, integral_between, integrate_twice


def test_constant_curvature_gives_parabola():
    pl = PiecewiseLinear([0.0, 1.0], [2.0, 2.0])
    s = integrate_twice(pl, 0.0, 0.0)
    ts = np.linspace(0, 1, 11)
    assert np.allclose(s(ts), ts**2)


def test_linear_curvature_gives_cubic():
    # double integral of 6t with zero constants is t^3
    pl = PiecewiseLinear([0.0, 1.0], [0.0, 6.0])
    s = integrate_twice(pl, 0.0, 0.0)
    ts = np.linspace(0, 1, 11)
    assert np.allclose(s(ts), ts**3)
    assert s(2.0 - 1.0, order=1) == pytest.approx(3.0)  # d/dt t^3 at t=1


def test_zero_curvature_gives_line():
    pl = PiecewiseLinear([0.0, 1.0], [0.0, 0.0])
    s = integrate_twice(pl, 1.0, 5.0)
    ts = np.linspace(0, 1, 7)
    assert np.allclose(s(ts), ts + 5.0)


def test_derivative_of_example_cubic():
    # -t^2 + 2t: constant second derivative -2, slope 2 at 0
    pl = PiecewiseLinear([0.0, 1.0], [-2.0, -2.0])
    s = integrate_twice(pl, 2.0, 0.0)
    assert s(1.0, order=1) == pytest.approx(0.0, abs=1e-14)
    assert s(2.0 / 3.0) == pytest.approx(-(2.0 / 3.0) ** 2 + 2 * (2.0 / 3.0))


def test_second_derivative_identity_random():
    rng = np.random.default_rng(3)
    for _ in range(20):
        k = rng.integers(2, 7)
        knots = np.cumsum(rng.uniform(0.2, 1.0, size=k))
        vals = rng.normal(size=k) * 5
        pl = PiecewiseLinear(knots, vals)
        s = integrate_twice(pl, rng.normal(), rng.normal())
        ts = rng.uniform(knots[0], knots[-1], size=1000)
        assert np.max(np.abs(s(ts, order=2) - pl(ts))) < 1e-11 * max(1.0, np.max(np.abs(vals)))


def test_continuity_at_knots():
    pl = PiecewiseLinear([0.0, 0.5, 1.0], [1.0, -3.0, 2.0])
    s = integrate_twice(pl, 0.3, -0.2)
    for order in (0, 1, 2):
        left = s(0.5 - 1e-12, order)
        right = s(0.5 + 1e-12, order)
        assert left == pytest.approx(right, abs=1e-9)
    # evaluation exactly at the knot picks the right-hand piece and agrees
    assert s(0.5) == pytest.approx(s(0.5 - 1e-13), abs=1e-12)


@given(
    st.floats(-3, 3),
    st.floats(-3, 3),
    st.floats(0.25, 4.0),
)
@settings(max_examples=50, deadline=None)
def test_integrate_twice_is_linear(c, d, scale):
    pl = PiecewiseLinear([0.0, 0.7, 1.3], [1.0, -2.0, 0.5])
    scaled = PiecewiseLinear(pl.knots, pl.values * scale)
    base = integrate_twice(pl, c, d)
    s2 = integrate_twice(scaled, c * scale, d * scale)
    ts = np.linspace(0, 1.3, 23)
    assert np.allclose(s2(ts), base(ts) * scale, rtol=1e-10, atol=1e-10)


def test_convexity_from_positive_values():
    rng = np.random.default_rng(11)
    knots = np.array([0.0, 0.4, 1.0, 1.7])
    vals = rng.uniform(0.1, 4.0, size=4)
    s = integrate_twice(PiecewiseLinear(knots, vals), -1.0, 0.0)
    ts = np.sort(rng.uniform(0, 1.7, size=400))
    d1 = s(ts, order=1)
    assert np.all(np.diff(d1) > 0)  # strictly convex


def test_integral_between_trivial():
    pl = PiecewiseLinear([0.0, 1.0], [2.0, 2.0])
    assert integral_between(pl, 0.0, 1.0) == pytest.approx(2.0)
    tri = PiecewiseLinear([0.0, 1.0], [0.0, 6.0])
    assert integral_between(tri, 0.0, 1.0) == pytest.approx(3.0)


def test_integral_between_against_quadrature():
    rng = np.random.default_rng(5)
    for _ in range(10):
        k = rng.integers(3, 8)
        knots = np.cumsum(rng.uniform(0.2, 1.0, size=k))
        vals = rng.normal(size=k) * 3
        pl = PiecewiseLinear(knots, vals)
        a = rng.uniform(knots[0], knots[-2])
        b = rng.uniform(a, knots[-1])
        # trapezoids on a grid that contains the kinks are exact for a
        # piecewise-linear integrand, so this reference is independent and
        # tight; Simpson cross-checks the smooth stretches
        inner = knots[(knots > a) & (knots < b)]
        ts = np.unique(np.concatenate([np.linspace(a, b, 4001), inner]))
        ref = np.trapezoid(pl(ts), ts)
        got = integral_between(pl, a, b)
        assert got == pytest.approx(ref, abs=1e-10)
        assert got == pytest.approx(simpson(pl(ts), x=ts), abs=1e-6)


def test_integral_bounds_checked():
    pl = PiecewiseLinear([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(DomainError):
        integral_between(pl, -0.1, 0.5)
    with pytest.raises(DomainError):
        integral_between(pl, 0.5, 1.5)


def test_bad_piecewise_linear():
    with pytest.raises(DomainError):
        PiecewiseLinear([1.0, 0.5], [0.0, 0.0])
    with pytest.raises(Exception):
        PiecewiseLinear([0.0, 1.0], [np.inf, 0.0])
