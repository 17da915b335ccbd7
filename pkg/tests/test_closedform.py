import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

import oracles
from entropy_lab import closedform as cf
from entropy_lab.closedform import DomainError, Params

# frozen reference values (30-digit mpmath evaluations of the Gamma formula)
A0_3_15 = 0.104776397202852144210835160359
A0_4_15 = 0.0827895050287036844423108093852


@pytest.mark.parametrize("n, expected", [(2, 2 * math.pi), (3, 4 * math.pi), (4, 2 * math.pi**2)])
def test_surface_area(n, expected):
    assert cf.surface_area(n) == pytest.approx(expected, rel=1e-14)


def test_gamma_integral_examples():
    assert cf.gamma_integral(1, 1, 1) == pytest.approx(1.0, rel=1e-14)
    expected = math.gamma(1.5) / (2 * 2**1.5)
    assert cf.gamma_integral(3, 2, 2) == pytest.approx(expected, rel=1e-14)
    assert cf.gamma_integral(3, 2, 2) == pytest.approx(0.156663, abs=1e-5)


def test_gamma_integral_normalizes_p2_gaussian():
    # a^2 * 4 pi * int r^2 e^{-2 r^2} dr = 1 with a = (2/pi)^(3/4)
    a = (2 / math.pi) ** 0.75
    assert a**2 * cf.surface_area(3) * cf.gamma_integral(3, 2, 2) == pytest.approx(1.0, rel=1e-13)


@given(st.floats(0.5, 6), st.floats(0.5, 6), st.floats(0.5, 6))
def test_gamma_integral_matches_quadrature(m, s, c):
    ref = oracles.gamma_integral(mp.mpf(m), mp.mpf(s), mp.mpf(c))
    assert cf.gamma_integral(m, s, c) == pytest.approx(float(ref), rel=1e-10)


@pytest.mark.parametrize("args", [(0, 1, 1), (1, -1, 1), (1, 1, 0)])
def test_gamma_integral_rejects_nonpositive(args):
    with pytest.raises(DomainError):
        cf.gamma_integral(*args)


def test_a0_closed_forms():
    assert cf.a0_constant(3, 2) == pytest.approx(2 / (3 * math.pi * math.e), rel=1e-14)
    assert cf.a0_constant(4, 2) == pytest.approx(1 / (2 * math.pi * math.e), rel=1e-14)


@pytest.mark.parametrize("n, p, golden", [(3, 1.5, A0_3_15), (4, 1.5, A0_4_15)])
def test_a0_golden(n, p, golden):
    assert cf.a0_constant(n, p) == pytest.approx(golden, rel=1e-13)
    assert golden == pytest.approx(float(oracles.a0(n, p)), rel=1e-25)


@pytest.mark.parametrize("n", range(3, 9))
def test_a0_p2_identity(n):
    assert cf.a0_constant(n, 2) * (n * math.pi * math.e / 2) == pytest.approx(1.0, abs=1e-12)


@given(st.integers(3, 8), st.floats(1.05, 2.0))
def test_a0_matches_high_precision(n, p):
    assert cf.a0_constant(n, p) == pytest.approx(float(oracles.a0(n, p)), rel=1e-12)


@pytest.mark.parametrize("n, p", [(3, 3.0), (2, 2.0), (3, 1.0), (3, 0.5)])
def test_a0_domain(n, p):
    with pytest.raises(DomainError):
        cf.a0_constant(n, p)


def test_theta_examples():
    assert cf.theta(3, 2, 1) == pytest.approx(3 / 5, rel=1e-15)
    assert cf.theta(4, 2, 1) == pytest.approx(2 / 3, rel=1e-15)
    assert cf.theta(3, 2, 2 - 1e-12) == pytest.approx(0.0, abs=1e-11)


@given(st.integers(3, 8), st.floats(1.1, 2.0), st.floats(0, 1), st.floats(0, 1))
def test_theta_range_and_monotone(n, p, s1, s2):
    q1, q2 = sorted((1 + s1 * (p - 1) * 0.999, 1 + s2 * (p - 1) * 0.999))
    t1, t2 = cf.theta(n, p, q1), cf.theta(n, p, q2)
    assert 0 < t2 <= t1 < 1
    if q2 - q1 > 1e-9:
        assert t1 > t2


@pytest.mark.parametrize("q", [2.0, 2.5, 0.9])
def test_theta_domain(q):
    with pytest.raises(DomainError):
        cf.theta(3, 2, q)


def test_params_guards():
    assert Params(3, 2, 1.5).theta == pytest.approx(cf.theta(3, 2, 1.5))
    assert Params(3, 1.5).tail_exponent == pytest.approx(3.0)
    assert Params(3, 1.5).p_star == pytest.approx(3.0)
    with pytest.raises(DomainError, match="requires p < n and p ≤ 2"):
        Params(3, 2.5)
    with pytest.raises(DomainError):
        Params(2, 2)
    with pytest.raises(DomainError):
        Params(3, 2, 2)
    assert Params(5, 2.5, strict=False).p == 2.5


def test_params_nash_exponent_identity():
    # (p - q)(1 - theta)/(q theta) = p/n
    for n, p, q in [(3, 2, 1), (4, 1.5, 1.2), (5, 2, 1.9)]:
        par = Params(n, p, q)
        assert (p - q) * par.nash_exponent / p == pytest.approx(p / n, rel=1e-13)


def test_extremal_spec_gaussian():
    ext = cf.extremal_spec(3, 2)
    assert ext.a == pytest.approx((2 / math.pi) ** 0.75, rel=1e-14)
    assert ext.a == pytest.approx(0.71270, abs=1e-5)
    assert (ext.b, ext.s) == (1.0, 2.0)


@pytest.mark.parametrize("n, p", [(3, 2), (4, 2), (3, 1.5), (5, 2), (3, 1.2), (6, 1.7)])
def test_extremal_unit_mass(n, p):
    ext = cf.extremal_spec(n, p)
    assert ext.s == pytest.approx(p / (p - 1))
    assert ext.s > 2 or p == 2
    mass = oracles.lp_mass(oracles.stretched_exp(ext.a, ext.b, ext.s), n, p)
    assert float(mass) == pytest.approx(1.0, rel=1e-10)


def test_displayed_prefactor_differs_from_normalization():
    # the two conventions disagree at p = 2; both are reported, neither is preferred
    assert cf.displayed_prefactor(3, 2) == pytest.approx(math.pi**-1.5, rel=1e-14)
    assert abs(cf.displayed_prefactor(3, 2) - cf.extremal_spec(3, 2).a) > 0.5


def test_moments_gaussian():
    m = cf.moments(3, 2)
    assert m.J1 == pytest.approx(0.75, rel=1e-13)
    assert m.I2 == pytest.approx(3.0, rel=1e-13)
    assert m.I1 == pytest.approx(-1.5 * math.log(math.pi * math.e / 2), rel=1e-13)
    assert m.J2 == pytest.approx(3.75, rel=1e-13)


@pytest.mark.parametrize("n, p", [(3, 2), (4, 2), (3, 1.5), (5, 2), (4, 1.3)])
def test_moments_two_routes(n, p):
    closed = cf.moments(n, p)
    quad = cf.moments_by_quadrature(n, p)
    for name in ("I1", "I2", "J1", "J2", "J3"):
        assert getattr(closed, name) == pytest.approx(getattr(quad, name), rel=1e-8)
    assert closed.J1 > 0 and closed.J2 > 0 and closed.I2 > 0


@pytest.mark.parametrize("n, p", [(3, 2), (3, 1.5)])
def test_moments_against_mpmath(n, p):
    ext = cf.extremal_spec(n, p)
    f = oracles.stretched_exp(ext.a, ext.b, ext.s)
    m = cf.moments(n, p)
    up = lambda r: f(r) ** p
    ref = {
        "I1": oracles.entropy(f, n, p),
        "I2": oracles.dirichlet(f, n, p),
        "J1": oracles.radial_integral(n, lambda r: up(r) * r**2),
        "J2": oracles.radial_integral(n, lambda r: abs(mp.diff(f, r)) ** p * r**2),
        "J3": oracles.radial_integral(n, lambda r: up(r) * mp.log(up(r)) * r**2),
    }
    for name, val in ref.items():
        assert getattr(m, name) == pytest.approx(float(val), rel=1e-10), name


def test_moments_frozen_p15():
    m = cf.moments(3, 1.5)
    frozen = dict(I1=-2.0269468502, I2=3.4641016151, J1=0.6889235962, J2=3.9775022369, J3=-1.8556939107)
    for name, val in frozen.items():
        assert getattr(m, name) == pytest.approx(val, abs=2e-10)


def test_scipy_quad_cross_check_of_gamma_integral():
    val, _ = integrate.quad(lambda r: r**2 * np.exp(-2 * r**2), 0, np.inf)
    assert cf.gamma_integral(3, 2, 2) == pytest.approx(val, rel=1e-10)
