import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from sphlab.kernels import (CUBIC_SPLINE, WENDLAND_C4, continuous_moment, kernel_by_name,
                            kernel_derivatives, kernel_value, scaling_relation_check)

KERNELS = [CUBIC_SPLINE, WENDLAND_C4]


def _sympy_kernel(kernel):
    """Independent symbolic kernel in Cartesian form."""
    x, y, h = sp.symbols("x y h", real=True)
    q = sp.sqrt(x**2 + y**2) / h
    if kernel is CUBIC_SPLINE:
        c = sp.Rational(15, 7) / (sp.pi * h**2)
        w = sp.Piecewise((c * (sp.Rational(2, 3) - q**2 + q**3 / 2), q < 1),
                         (c * (2 - q) ** 3 / 6, q < 2), (0, True))
    else:
        c = 9 / (sp.pi * h**2)
        w = sp.Piecewise((c * (1 - q) ** 6 * (1 + 6 * q + sp.Rational(35, 3) * q**2), q < 1),
                         (0, True))
    exprs = [w, sp.diff(w, x), sp.diff(w, y), sp.diff(w, x, 2), sp.diff(w, x, y), sp.diff(w, y, 2)]
    return [sp.lambdify((x, y, h), e, "math") for e in exprs]


_SYMPY = {k.name: _sympy_kernel(k) for k in KERNELS}


def test_origin_values():
    assert kernel_value(CUBIC_SPLINE, 0.0, 1.0) == pytest.approx(15 / (7 * math.pi) * 2 / 3, rel=1e-14)
    assert kernel_value(CUBIC_SPLINE, 0.0, 1.0) == pytest.approx(0.45473, abs=1e-5)
    assert kernel_value(WENDLAND_C4, 0.0, 1.0) == pytest.approx(9 / math.pi, rel=1e-14)
    assert kernel_value(WENDLAND_C4, 0.0, 1.0) == pytest.approx(2.86479, abs=1e-5)


def test_support_edges_are_zero():
    assert kernel_value(CUBIC_SPLINE, 2.0, 1.0) == 0.0
    assert kernel_value(WENDLAND_C4, 1.0, 1.0) == 0.0
    d = kernel_derivatives(WENDLAND_C4, 1.01, 0.0, 1.0)
    assert d.as_tuple() == (0.0,) * 6
    d = kernel_derivatives(CUBIC_SPLINE, 0.0, 2.3, 0.9)
    assert d.as_tuple() == (0.0,) * 6


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
def test_support_radius(kernel):
    assert kernel.support_radius(0.5) == pytest.approx(0.5 * kernel.support_factor)
    assert kernel_by_name(kernel.name) is kernel


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
def test_origin_derivatives(kernel):
    d = kernel_derivatives(kernel, 0.0, 0.0, 0.7)
    assert d.wx == 0.0 and d.wy == 0.0 and d.wxy == 0.0
    assert d.wxx == d.wyy
    assert np.all(np.isfinite(d.as_tuple()))
    # radial limit: W_xx(0) = lim W_xx along the x axis
    eps = 1e-6 * 0.7
    near = kernel_derivatives(kernel, eps, 0.0, 0.7)
    assert d.wxx == pytest.approx(near.wxx, rel=1e-5)


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
def test_monotone_and_positive(kernel):
    r = np.linspace(0.0, kernel.support_factor, 2001)
    w = kernel_value(kernel, r, 1.0)
    assert w[0] > 0
    assert np.all(np.diff(w) <= 0)
    assert np.all(w >= 0)


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
def test_derivatives_match_symbolic(kernel):
    gen = np.random.default_rng(11)
    fns = _SYMPY[kernel.name]
    for _ in range(100):
        h = gen.uniform(0.05, 2.0)
        r = gen.uniform(0.01, 0.98) * kernel.support_factor * h
        t = gen.uniform(0, 2 * np.pi)
        dx, dy = r * np.cos(t), r * np.sin(t)
        got = kernel_derivatives(kernel, dx, dy, h).as_tuple()
        scale = abs(fns[0](0.0, 0.0, h)) / h**2
        for g, f in zip(got, fns):
            assert g == pytest.approx(float(f(dx, dy, h)), rel=1e-9, abs=1e-12 * scale)


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
def test_derivatives_match_finite_differences(kernel):
    gen = np.random.default_rng(5)

    def w(x, y, h):
        return kernel_value(kernel, math.hypot(x, y), h)

    for _ in range(100):
        h = gen.uniform(0.05, 2.0)
        r = gen.uniform(0.05, 0.95) * kernel.support_factor * h
        t = gen.uniform(0, 2 * np.pi)
        x, y = r * np.cos(t), r * np.sin(t)
        e = 1e-5 * h
        fd = (
            (w(x + e, y, h) - w(x - e, y, h)) / (2 * e),
            (w(x, y + e, h) - w(x, y - e, h)) / (2 * e),
            (w(x + e, y, h) - 2 * w(x, y, h) + w(x - e, y, h)) / e**2,
            (w(x + e, y + e, h) - w(x + e, y - e, h) - w(x - e, y + e, h) + w(x - e, y - e, h)) / (4 * e * e),
            (w(x, y + e, h) - 2 * w(x, y, h) + w(x, y - e, h)) / e**2,
        )
        d = kernel_derivatives(kernel, x, y, h)
        ref = (abs(d.wx) + abs(d.wy), abs(d.wx) + abs(d.wy),
               abs(d.wxx) + abs(d.wxy) + abs(d.wyy), abs(d.wxx) + abs(d.wxy) + abs(d.wyy),
               abs(d.wxx) + abs(d.wxy) + abs(d.wyy))
        for got, approx, s in zip((d.wx, d.wy, d.wxx, d.wxy, d.wyy), fd, ref):
            assert abs(got - approx) <= 1e-4 * s


def test_wxx_finite_difference_example():
    e = 1e-4
    fd = (kernel_value(CUBIC_SPLINE, 0.5 + e, 1.0) - 2 * kernel_value(CUBIC_SPLINE, 0.5, 1.0)
          + kernel_value(CUBIC_SPLINE, 0.5 - e, 1.0)) / e**2
    assert kernel_derivatives(CUBIC_SPLINE, 0.5, 0.0, 1.0).wxx == pytest.approx(fd, rel=1e-5)


@given(dx=st.floats(-3, 3), dy=st.floats(-3, 3), h=st.floats(0.05, 2.0))
@settings(max_examples=200, deadline=None)
def test_derivative_symmetries(dx, dy, h):
    for kernel in KERNELS:
        a = kernel_derivatives(kernel, dx, dy, h)
        b = kernel_derivatives(kernel, dy, dx, h)
        assert a.wxy == pytest.approx(b.wxy, rel=1e-12, abs=1e-300)
        assert a.w == pytest.approx(b.w, rel=1e-12, abs=1e-300)
        assert np.all(np.isfinite(a.as_tuple()))


def test_rejects_bad_input():
    for bad in (0.0, -1.0, float("nan")):
        with pytest.raises(ValueError):
            kernel_value(CUBIC_SPLINE, 0.1, bad)
        with pytest.raises(ValueError):
            kernel_derivatives(WENDLAND_C4, 0.1, 0.0, bad)
    with pytest.raises(ValueError):
        kernel_value(CUBIC_SPLINE, float("inf"), 1.0)
    with pytest.raises(ValueError):
        kernel_value(CUBIC_SPLINE, -0.1, 1.0)
    with pytest.raises(ValueError):
        kernel_derivatives(CUBIC_SPLINE, float("nan"), 0.0, 1.0)


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
@pytest.mark.parametrize("h", [0.11, 0.342, 1.0])
def test_normalization(kernel, h):
    assert continuous_moment(kernel, 0, h) == pytest.approx(1.0, abs=1e-6)
    # independent adaptive quadrature of 2 pi int r W dr
    val, _ = quad(lambda r: 2 * np.pi * r * kernel_value(kernel, r, h), 0, kernel.support_radius(h),
                  points=[h] if kernel is CUBIC_SPLINE else None, epsabs=1e-13)
    assert val == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
def test_odd_moments_vanish(kernel):
    for l in (1, 3):
        assert abs(continuous_moment(kernel, l, 0.7)) <= 1e-10


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
def test_second_moment(kernel):
    m1 = continuous_moment(kernel, 2, 1.0)
    m2 = continuous_moment(kernel, 2, 0.5)
    assert m1 > 0 and m2 > 0
    assert m1 / m2 == pytest.approx(4.0, abs=1e-4)
    # x-moment is half the radial second moment pi int r^3 W dr
    val, _ = quad(lambda r: np.pi * r**3 * kernel_value(kernel, r, 1.0), 0, kernel.support_factor,
                  points=[1.0] if kernel is CUBIC_SPLINE else None, epsabs=1e-13)
    assert m1 == pytest.approx(val, rel=1e-7)


def test_moment_rejects_unsupported_order():
    with pytest.raises(ValueError):
        continuous_moment(CUBIC_SPLINE, 5, 1.0)
    with pytest.raises(ValueError):
        continuous_moment(CUBIC_SPLINE, 0, 1.0, panels=100)


@pytest.mark.parametrize("kernel,r,h", [(CUBIC_SPLINE, 0.7, 0.3), (WENDLAND_C4, 0.5, 2.0),
                                        (CUBIC_SPLINE, 1.9, 0.11)])
def test_scaling_relation_examples(kernel, r, h):
    assert scaling_relation_check(kernel, r, h) <= 1e-12


@given(r=st.floats(0, 2.5), h=st.floats(0.01, 10))
@settings(max_examples=200, deadline=None)
def test_scaling_relation_property(r, h):
    for kernel in KERNELS:
        assert scaling_relation_check(kernel, r, h) <= 1e-12
