"""Closed-form constants, exponents and extremal moments.

All radial integrals here reduce to

    int_0^inf r^(m-1) exp(-c r^s) dr = Gamma(m/s) / (s c^(m/s))

which is :func:`gamma_integral`. ``math.gamma``/``math.lgamma`` (Lanczos) supply Gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import numerics


class DomainError(ValueError):
    """A parameter lies outside the domain where a quantity is defined."""


@dataclass(frozen=True)
class Params:
    """Dimension and exponents ``(n, p, q)``.

    ``p <= 2`` is enforced unless ``strict=False``; ``p < n`` always is.
    """

    n: int
    p: float
    q: float | None = None
    strict: bool = True

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"dimension must be an integer >= 2, got n={self.n}")
        if not (1.0 < self.p < self.n) or (self.strict and self.p > 2.0):
            bound = "p ≤ 2" if self.strict else "p > 1"
            raise DomainError(f"requires p < n and {bound} (got n={self.n}, p={self.p})")
        if self.q is not None and not (1.0 <= self.q < self.p):
            raise DomainError(f"requires 1 <= q < p (got q={self.q}, p={self.p})")

    @property
    def theta(self) -> float:
        if self.q is None:
            raise DomainError("theta needs q")
        return theta(self.n, self.p, self.q)

    @property
    def tail_exponent(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def p_star(self) -> float:
        return self.n * self.p / (self.n - self.p)

    @property
    def nash_exponent(self) -> float:
        """The ``p(1 - theta)/(q theta)`` power carried by the ``L^q`` mass."""
        th = self.theta
        return self.p * (1.0 - th) / (self.q * th)


@dataclass(frozen=True)
class ExtremalSpec:
    """Extremal ``a exp(-b r^s)`` of the Euclidean entropy inequality."""

    n: int
    p: float
    a: float
    b: float
    s: float


@dataclass(frozen=True)
class Moments:
    """Euclidean integrals of the unit-mass extremal.

    I1 = int u^p log u^p, I2 = int |grad u|^p, and J1, J2, J3 the same
    integrands (mass, energy, entropy) weighted by |x|^2.
    """

    I1: float
    I2: float
    J1: float
    J2: float
    J3: float


def _check_positive(**kwargs):
    for name, val in kwargs.items():
        if not (val > 0 and math.isfinite(val)):
            raise DomainError(f"{name} must be positive and finite, got {val}")


def surface_area(n: int) -> float:
    """Area of the unit sphere S^(n-1) in R^n."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def gamma_integral(m: float, s: float, c: float) -> float:
    """``int_0^inf r^(m-1) exp(-c r^s) dr``."""
    _check_positive(m=m, s=s, c=c)
    k = m / s
    return math.exp(math.lgamma(k) - math.log(s) - k * math.log(c))


def a0_constant(n: int, p: float) -> float:
    """Best constant of the Euclidean L^p entropy inequality."""
    if not (1.0 < p < n):
        raise DomainError(f"requires 1 < p < n (got n={n}, p={p})")
    ratio = math.gamma(n / 2.0 + 1.0) / math.gamma(n * (p - 1.0) / p + 1.0)
    return (p / n) * ((p - 1.0) / math.e) ** (p - 1.0) * math.pi ** (-p / 2.0) * ratio ** (p / n)


def theta(n: int, p: float, q: float) -> float:
    """Interpolation exponent of the L^p Nash inequality."""
    if not (1.0 <= q < p):
        raise DomainError(f"requires 1 <= q < p (got q={q}, p={p})")
    if not (p < n):
        raise DomainError(f"requires p < n (got n={n}, p={p})")
    return n * (p - q) / (q * (p - n) + n * p)


def extremal_spec(n: int, p: float) -> ExtremalSpec:
    """Unit-mass extremal in the gauge b = 1."""
    if not (1.0 < p < n):
        raise DomainError(f"requires 1 < p < n (got n={n}, p={p})")
    s = p / (p - 1.0)
    mass_at_unit_amplitude = surface_area(n) * gamma_integral(n, s, p)
    return ExtremalSpec(n=n, p=p, a=mass_at_unit_amplitude ** (-1.0 / p), b=1.0, s=s)


def displayed_prefactor(n: int, p: float) -> float:
    """The amplitude ``pi^(-n/2) Gamma(n/2+1) / Gamma(n(p-1)/p+1)`` printed for the extremal.

    Reported next to :func:`extremal_spec`'s amplitude; it is not an L^p normalization.
    """
    return math.pi ** (-n / 2.0) * math.gamma(n / 2.0 + 1.0) / math.gamma(n * (p - 1.0) / p + 1.0)


def moments(n: int, p: float) -> Moments:
    """The five extremal integrals, in closed form.

    With b = 1 we have u^p = a^p e^{-p r^s}, |u'|^p = a^p s^p r^s e^{-p r^s} (since
    p(s-1) = s) and log u^p = p log a - p r^s, so every integrand is a sum of
    terms r^k e^{-p r^s}.
    """
    ext = extremal_spec(n, p)
    a, s = ext.a, ext.s
    w = surface_area(n) * a**p

    def g(m):
        return w * gamma_integral(m, s, p)

    J1 = g(n + 2)
    I2 = s**p * g(n + s)
    J2 = s**p * g(n + s + 2)
    log_ap = p * math.log(a)
    I1 = log_ap * g(n) - p * g(n + s)
    J3 = log_ap * J1 - p * g(n + 2 + s)
    return Moments(I1=I1, I2=I2, J1=J1, J2=J2, J3=J3)


def moments_by_quadrature(n: int, p: float) -> Moments:
    """Direct adaptive quadrature of the same five integrals (cross-check path)."""
    ext = extremal_spec(n, p)
    a, s = ext.a, ext.s
    om = surface_area(n)
    r_max = (80.0 / p) ** (1.0 / s)
    pts = [0.5, 1.0, 2.0, 4.0]

    def u_p(r):
        return a**p * math.exp(-p * r**s)

    def log_u_p(r):
        return p * math.log(a) - p * r**s

    def grad_p(r):
        return (a * s * r ** (s - 1.0) * math.exp(-(r**s))) ** p

    def radial(f):
        return om * numerics.quad(lambda r: f(r) * r ** (n - 1), 0.0, r_max, pts)

    return Moments(
        I1=radial(lambda r: u_p(r) * log_u_p(r)),
        I2=radial(grad_p),
        J1=radial(lambda r: u_p(r) * r * r),
        J2=radial(lambda r: grad_p(r) * r * r),
        J3=radial(lambda r: u_p(r) * log_u_p(r) * r * r),
    )
