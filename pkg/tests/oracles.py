"""Independent high-precision references built on mpmath.

Nothing here imports the package's quadrature or special-function code: radial
integrals are done by mpmath tanh-sinh quadrature of hand-written profiles, and
derivatives by mpmath numerical differentiation.
"""

import mpmath as mp

mp.mp.dps = 30


def surface_area(n):
    return 2 * mp.pi ** (mp.mpf(n) / 2) / mp.gamma(mp.mpf(n) / 2)


def a0(n, p):
    n, p = mp.mpf(n), mp.mpf(p)
    return (p / n) * ((p - 1) / mp.e) ** (p - 1) * mp.pi ** (-p / 2) * (
        mp.gamma(n / 2 + 1) / mp.gamma(n * (p - 1) / p + 1)
    ) ** (p / n)


def gamma_integral(m, s, c):
    return mp.quad(lambda r: r ** (m - 1) * mp.exp(-c * r**s), [0, 1, mp.inf])


def stretched_exp(a, b, s):
    return lambda r: a * mp.exp(-b * r**s)


def gaussian_mixture(*pairs):
    def f(r):
        return mp.fsum(w * mp.exp(-b * r**2) for w, b in pairs)

    return f


def radial_integral(n, g, cuts=(0, 1, 2, 4, 8, mp.inf)):
    """omega_{n-1} int_0^inf g(r) r^(n-1) dr."""
    return surface_area(n) * mp.quad(lambda r: g(r) * r ** (n - 1), list(cuts))


def lp_mass(f, n, p):
    return radial_integral(n, lambda r: f(r) ** p)


def entropy(f, n, p):
    def g(r):
        v = f(r) ** p
        return v * mp.log(v) if v > 0 else mp.mpf(0)

    return radial_integral(n, g)


def dirichlet(f, n, p):
    return radial_integral(n, lambda r: abs(mp.diff(f, r)) ** p)


def nash_quotient(f, n, p, q):
    n, p, q = mp.mpf(n), mp.mpf(p), mp.mpf(q)
    th = n * (p - q) / (q * (p - n) + n * p)
    mp_ = lp_mass(f, n, p)
    mq = radial_integral(n, lambda r: f(r) ** q)
    return mp_ ** (1 / th) / (dirichlet(f, n, p) * mq ** (p * (1 - th) / (q * th)))
