"""Tests for the incomplete gamma function and the smoothing kernel."""

import math

import mpmath
import numpy as np
import pytest

from addtwist.errors import DomainError
from addtwist.special import SmoothingKernel, gammainc_upper


@pytest.fixture(scope="module")
def kernel():
    return SmoothingKernel()


@pytest.mark.parametrize("s", [0.7, 1.3, 0.3 + 2.0j, 0.7 - 5.0j, 1.0 + 12.0j, -0.5 + 1.0j])
def test_gammainc_upper_matches_mpmath(s):
    """Test Gamma(s, x) against mpmath on both sides of the series/fraction switch."""
    xs = np.array([0.05, 0.5, 2.0, 9.0, 30.0])
    values = gammainc_upper(s, xs)
    for x, value in zip(xs, values):
        expected = complex(mpmath.gammainc(s, a=x))
        assert abs(value - expected) <= 1e-11 * max(abs(expected), 1e-300), (s, x)


def test_gammainc_upper_domain():
    """Test the domain errors."""
    with pytest.raises(DomainError):
        gammainc_upper(1.0, 0.0)
    with pytest.raises(DomainError):
        gammainc_upper(-1.0, 0.5)


def test_kernel_matches_positive_integral(kernel):
    """Test the contour integral against the independent positive-kernel route."""
    for y in (0.05, 0.2, 0.7, 1.0, 3.0, 25.0):
        value, err = kernel.V(y)
        assert err < 1e-12
        assert abs(value - kernel.V_positive(y)) < 1e-10, y


def test_kernel_matches_mpmath_contour(kernel):
    """Test V(y) against an mpmath quadrature of the vertical integral."""
    mpmath.mp.dps = 30
    try:
        for y in (0.15, 0.6):

            def integrand(t):
                u = 2 + 1j * t
                return mpmath.re(mpmath.power(y, u) * mpmath.exp((u / 8) ** 2) * mpmath.gamma(u))

            expected = float(mpmath.quad(integrand, [-40, 0, 40]) / (2 * mpmath.pi))
            assert abs(kernel.V(y)[0] - expected) < 1e-11
    finally:
        mpmath.mp.dps = 15


def test_kernel_large_y(kernel):
    """Test 1 - V(1000) against the expansion in 1/y."""
    value, _ = kernel.V(1e3)
    assert abs(value - kernel.large_y(1e3)) < 1e-9
    assert abs((1 - value) - math.exp(1 / 64) / 1e3) < 1e-5


def test_kernel_is_increasing(kernel):
    """Test that V increases from 0 towards 1."""
    ys = np.exp(np.linspace(math.log(0.02), math.log(500), 200))
    values = kernel.V_direct(ys)
    assert np.all(np.diff(values) > 0)
    assert values[0] < 1e-9
    assert 0.99 < values[-1] < 1


def test_kernel_table(kernel):
    """Test the spline table against direct evaluation."""
    ys = np.exp(np.linspace(math.log(0.011), math.log(9000), 157))
    assert np.max(np.abs(kernel.V_array(ys) - kernel.V_direct(ys))) < 1e-10
    assert kernel.V_array(np.array([1e-3]))[0] == 0
    assert abs(kernel.V_array(np.array([2e4]))[0] - kernel.large_y(2e4)) < 1e-15


def test_kernel_cutoff(kernel):
    """Test that V stays below eps left of the cutoff."""
    y_cut = kernel.cutoff(1e-12)
    assert 0 < y_cut < 1
    assert kernel.V(y_cut)[0] == pytest.approx(1e-12, rel=1e-3)
    assert kernel.V(0.9 * y_cut)[0] < 1e-12
    with pytest.raises(DomainError):
        kernel.cutoff(0.7)


def test_density_has_mellin_transform_G(kernel):
    """Test int K(tau) tau^(-u) dtau / tau = G(u) at real u."""
    for u in (0.0, 0.5, -1.0):
        value = mpmath.quad(lambda v: kernel.density(math.exp(v)) * math.exp(-u * v), [-3, 0, 3])
        assert abs(float(value) - float(kernel.G(u))) < 1e-10


def test_table_floor_follows_width(kernel):
    """Test that the table starts where V drops under the floor, for narrow and wide G."""
    wide = SmoothingKernel(width=1.0)
    assert wide.table_min < 1e-6 < kernel.table_min < 0.01
    for k in (kernel, wide):
        assert k.V(k.table_min)[0] < k.TABLE_FLOOR


def test_wide_kernel_table():
    """Test V_array for G(u) = exp(u^2), where V is far from zero at y = 0.005."""
    wide = SmoothingKernel(width=1.0)
    ys = np.array([1e-4, 0.005, 0.3, 40.0])
    direct = np.array([wide.V_positive(y) for y in ys])
    assert direct[1] > 1e-4
    assert np.max(np.abs(wide.V_array(ys) - direct)) < 1e-10
    assert abs(wide.V(0.005)[0] - direct[1]) < 1e-10
