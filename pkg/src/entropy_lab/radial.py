"""Radial functions on R^n and the Euclidean entropy functionals.

A profile is either analytic (:class:`ParametricProfile`, integrated by adaptive
Gauss-Kronrod with its exact derivative) or sampled (:class:`RadialProfile`,
integrated by Simpson's rule with 5-point finite differences). Every functional
accepts both.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import numerics
from .closedform import DomainError, a0_constant, extremal_spec, surface_area

FAMILIES = ("stretched_exp", "gaussian_mixture", "bump_mixture")

NORMALIZATION_TOL = 1e-8
TAIL_TOL = 1e-12
# exponent at which a component's p-th power is cut off: e^-70 ~ 4e-31
_TAIL_EXPONENT = 70.0

_ARITY = {"stretched_exp": 3, "gaussian_mixture": 2, "bump_mixture": 3}


class DegenerateProfileError(ValueError):
    pass


class NormalizationError(ValueError):
    pass


def _components(family: str, params: tuple[float, ...]) -> list[tuple[float, ...]]:
    k = _ARITY[family]
    if family == "stretched_exp":
        if len(params) != 3:
            raise DomainError("stretched_exp takes (a, b, s)")
    elif len(params) == 0 or len(params) % k:
        raise DomainError(f"{family} takes a flat list of {k}-tuples")
    return [tuple(params[i : i + k]) for i in range(0, len(params), k)]


def _check_family(family: str, params: tuple[float, ...]) -> None:
    if family not in FAMILIES:
        raise DomainError(f"unknown family {family!r}; choose from {FAMILIES}")
    if not all(math.isfinite(x) for x in params):
        raise DomainError(f"non-finite parameters {params}")
    for comp in _components(family, params):
        if family == "stretched_exp":
            a, b, s = comp
            ok = a > 0 and b > 0 and 1.0 <= s <= 16.0
        elif family == "gaussian_mixture":
            w, b = comp
            ok = w > 0 and b > 0
        else:
            w, R, m = comp
            ok = w > 0 and R > 0 and m >= 2.0
        if not ok:
            raise DomainError(f"{family} component {comp} outside its parameter domain")


@dataclass(frozen=True)
class ParametricProfile:
    """``u(r) = amp * f(scale * r)`` for a family member ``f``.

    stretched_exp:     f = a exp(-b x^s)
    gaussian_mixture:  f = sum_i w_i exp(-b_i x^2)
    bump_mixture:      f = sum_i w_i exp(1 - 1/(1 - (x/R_i)^m_i)) on x < R_i
    """

    family: str
    params: tuple[float, ...]
    amp: float = 1.0
    scale: float = 1.0
    _comps: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(x) for x in self.params))
        _check_family(self.family, self.params)
        object.__setattr__(self, "_comps", tuple(_components(self.family, self.params)))
        if not (self.amp > 0 and self.scale > 0 and math.isfinite(self.amp) and math.isfinite(self.scale)):
            raise DegenerateProfileError("amplitude and scale must be positive and finite")

    # -- evaluation -------------------------------------------------------

    def _terms(self, x: np.ndarray, with_derivative: bool):
        """Per-component ``log f_i(x)`` and ``d/dx log f_i(x)`` (or None)."""
        logs, dlogs = [], []
        for comp in self._comps:
            if self.family == "stretched_exp":
                a, b, s = comp
                xs1 = x ** (s - 1.0)
                logs.append(math.log(a) - b * xs1 * x)
                if with_derivative:
                    dlogs.append(-b * s * xs1)
            elif self.family == "gaussian_mixture":
                w, b = comp
                logs.append(math.log(w) - b * x * x)
                if with_derivative:
                    dlogs.append(-2.0 * b * x)
            else:
                w, R, m = comp
                t = x / R
                inside = t < 1.0
                ti = np.where(inside, t, 0.0)
                tm = ti**m
                logs.append(np.where(inside, math.log(w) + 1.0 - 1.0 / (1.0 - tm), -np.inf))
                if with_derivative:
                    dlogs.append(np.where(inside, -m * ti ** (m - 1.0) / (1.0 - tm) ** 2 / R, 0.0))
        return logs, (dlogs if with_derivative else None)

    def _log_and_derivative(self, r, with_derivative: bool = True):
        x = self.scale * np.asarray(r, dtype=float)
        logs, dlogs = self._terms(x, with_derivative)
        if len(logs) == 1:
            total = logs[0]
            d = np.exp(total) * dlogs[0] if with_derivative else None
        else:
            stack = np.stack(logs)
            total = np.logaddexp.reduce(stack, axis=0)
            d = None
            if with_derivative:
                f = np.exp(stack)
                d = np.sum(np.where(f > 0, f * np.stack(dlogs), 0.0), axis=0)
        log_u = math.log(self.amp) + total
        du = self.amp * self.scale * d if with_derivative else None
        return log_u, du

    def log_value(self, r) -> np.ndarray:
        return self._log_and_derivative(r, with_derivative=False)[0]

    def value(self, r) -> np.ndarray:
        return np.exp(self.log_value(r))

    def derivative(self, r) -> np.ndarray:
        return self._log_and_derivative(r)[1]

    # -- support ----------------------------------------------------------

    def r_max(self, p: float) -> float:
        """Radius beyond which the p-th power carries < 1e-12 of the mass."""
        comps = self._comps
        if self.family == "bump_mixture":
            return max(c[1] for c in comps) / self.scale
        if self.family == "stretched_exp":
            _, b, s = comps[0]
            return (_TAIL_EXPONENT / (p * b)) ** (1.0 / s) / self.scale
        w_max = max(c[0] for c in comps)
        radii = [
            math.sqrt((_TAIL_EXPONENT + max(0.0, math.log(w / w_max))) / (p * b)) for w, b in comps
        ]
        return max(radii) / self.scale

    def breakpoints(self) -> list[float]:
        pts = []
        for comp in self._comps:
            if self.family == "stretched_exp":
                _, b, s = comp
                r0 = b ** (-1.0 / s)
                pts += [0.5 * r0, r0, 2.0 * r0, 4.0 * r0]
            elif self.family == "gaussian_mixture":
                r0 = comp[1] ** -0.5
                pts += [0.5 * r0, r0, 2.0 * r0, 4.0 * r0]
            else:
                _, R, m = comp
                pts += [0.5 * R, R * (1.0 - 1.0 / m), R * (1.0 - 0.1 / m), R]
        return [x / self.scale for x in pts]

    # -- gauge group ------------------------------------------------------

    def scaled(self, c: float) -> "ParametricProfile":
        return replace(self, amp=self.amp * c)

    def dilated(self, lam: float, n: int, p: float) -> "ParametricProfile":
        """Mass-preserving dilation ``lam^(n/p) u(lam x)``."""
        return replace(self, amp=self.amp * lam ** (n / p), scale=self.scale * lam)

    def normalized(self, n: int, p: float) -> "ParametricProfile":
        return self.scaled(1.0 / lp_norm(self, n, p))

    def sample(self, p: float, n_nodes: int = 2000, stretch: float = 2.0) -> "RadialProfile":
        grid = numerics.geometric_grid(self.r_max(p), n_nodes, stretch)
        return RadialProfile(grid, self.value(grid), descriptor=self.describe())

    def describe(self) -> dict:
        return {"family": self.family, "params": list(self.params), "amp": self.amp, "scale": self.scale}


@dataclass(frozen=True)
class RadialProfile:
    """Sampled radial function on a strictly increasing grid starting at 0."""

    grid: np.ndarray
    values: np.ndarray
    descriptor: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise DegenerateProfileError("grid and values must be 1-D arrays of equal length")
        if len(grid) < 5:
            raise DegenerateProfileError("need at least 5 nodes")
        if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise DegenerateProfileError("grid must start at 0 and increase strictly")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise DegenerateProfileError("values must be finite and nonnegative")
        if not np.any(values > 0):
            raise DegenerateProfileError("profile is identically zero")
        grid.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def scaled(self, c: float) -> "RadialProfile":
        return RadialProfile(self.grid, c * self.values, self.descriptor)

    def normalized(self, n: int, p: float) -> "RadialProfile":
        return self.scaled(1.0 / lp_norm(self, n, p))

    def tail_fraction(self, n: int, p: float) -> float:
        mass = _integrate(self, n, lambda r, u, lu, du: u**p)
        return float(self.values[-1] ** p * self.grid[-1] ** n / mass)

    def to_csv(self, path: str | Path | None = None, *, n: int | None = None, p: float | None = None) -> str:
        buf = io.StringIO()
        meta = {"n": n, "p": p, **self.descriptor}
        meta_txt = " ".join(
            f"{k}={','.join(map(repr, v)) if isinstance(v, (list, tuple)) else v}" for k, v in meta.items()
        )
        buf.write(f"# {meta_txt}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["radius", "value"])
        for r, v in zip(self.grid, self.values):
            w.writerow([repr(float(r)), repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path: str | Path) -> "RadialProfile":
        return cls.from_csv_text(Path(path).read_text())

    @classmethod
    def from_csv_text(cls, text: str) -> "RadialProfile":
        lines = text.splitlines()
        meta: dict = {}
        if lines and lines[0].startswith("#"):
            for tok in lines[0][1:].split():
                k, _, v = tok.partition("=")
                meta[k] = v
            lines = lines[1:]
        rows = list(csv.reader(lines))[1:]
        grid = np.array([float(r[0]) for r in rows])
        values = np.array([float(r[1]) for r in rows])
        return cls(grid, values, descriptor=meta)


Profile = ParametricProfile | RadialProfile


@dataclass(frozen=True)
class FunctionalReport:
    lp_mass: float
    entropy: float
    dirichlet: float
    deficit: float
    n: int
    p: float
    provenance: dict = field(default_factory=dict)


# -- integration --------------------------------------------------------------

Integrand = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _integrate(profile: Profile, n: int, integrand: Integrand, p: float = 2.0, epsabs: float = 0.0) -> float:
    """``omega_{n-1} int integrand(r, u, log u, u') r^(n-1) dr``."""
    if isinstance(profile, RadialProfile):
        r = profile.grid
        u = profile.values
        with np.errstate(divide="ignore"):
            lu = np.log(u)
        du = numerics.derivative(r, u)
        vals = integrand(r, u, lu, du) * r ** (n - 1)
        return surface_area(n) * numerics.integrate_samples(r, vals)

    def f(r):
        ra = np.array([r])
        lu, du = profile._log_and_derivative(ra)
        val = integrand(ra, np.exp(lu), lu, du)
        return float(val[0]) * r ** (n - 1)

    om = surface_area(n)
    return om * numerics.quad(f, 0.0, profile.r_max(p), profile.breakpoints(), epsabs / om)


def _pth_power(u, lu, p):
    return np.where(u > 0, np.exp(p * lu), 0.0)


def lp_mass(profile: Profile, n: int, p: float) -> float:
    """``int |u|^p dx``."""
    mass = _integrate(profile, n, lambda r, u, lu, du: _pth_power(u, lu, p), p)
    if not (mass > 0 and math.isfinite(mass)):
        raise DegenerateProfileError(f"L^p mass is {mass}")
    if isinstance(profile, RadialProfile):
        tail = profile.values[-1] ** p * profile.grid[-1] ** n / mass
        if tail > TAIL_TOL:
            raise DegenerateProfileError(
                f"grid truncation too short: tail criterion {tail:.2e} exceeds {TAIL_TOL:g}"
            )
    return mass


def lp_norm(profile: Profile, n: int, p: float) -> float:
    return lp_mass(profile, n, p) ** (1.0 / p)


def log_mass_ratio(profile: Profile, n: int, p: float, q: float) -> float:
    """``log(int u^q / int u^p)`` computed without cancellation as q -> p.

    Uses ``int u^q - int u^p = int u^p expm1((q - p) log u)``.
    """
    mp = lp_mass(profile, n, p)

    def excess(r, u, lu, du):
        return np.where(u > 0, np.exp(p * lu) * np.expm1((q - p) * np.where(u > 0, lu, 0.0)), 0.0)

    # the excess changes sign where u = 1 and may nearly cancel; its natural size is |q - p| mp
    d = _integrate(profile, n, excess, p, epsabs=1e-14 * abs(q - p) * mp)
    return math.log1p(d / mp)


def _require_normalized(profile: Profile, n: int, p: float) -> None:
    norm = lp_norm(profile, n, p)
    if abs(norm - 1.0) > NORMALIZATION_TOL:
        raise NormalizationError(f"requires ||u||_p = 1 within {NORMALIZATION_TOL:g}, got {norm!r}")


def _entropy_raw(profile: Profile, n: int, p: float) -> float:
    def f(r, u, lu, du):
        return np.where(u > 0, p * np.exp(p * lu) * np.where(u > 0, lu, 0.0), 0.0)

    return _integrate(profile, n, f, p)


def entropy(profile: Profile, n: int, p: float) -> float:
    """``int |u|^p log |u|^p`` of a unit-mass profile."""
    _require_normalized(profile, n, p)
    return _entropy_raw(profile, n, p)


def dirichlet(profile: Profile, n: int, p: float) -> float:
    """p-Dirichlet energy ``int |grad u|^p``."""
    return _integrate(profile, n, lambda r, u, lu, du: np.abs(du) ** p, p)


def entropy_deficit(profile: Profile, n: int, p: float) -> float:
    """``(n/p) log(A0 int |grad u|^p) - Ent(|u|^p)``; nonnegative, zero at extremals."""
    ent = entropy(profile, n, p)
    energy = dirichlet(profile, n, p)
    if not energy > 0:
        raise DegenerateProfileError("zero Dirichlet energy: deficit undefined")
    return (n / p) * math.log(a0_constant(n, p) * energy) - ent


def holder_interpolation_check(profile: Profile, n: int, p: float) -> tuple[float, float]:
    """Return ``(Ent, (n/p) log ||u||_{p*}^p)``; the first never exceeds the second."""
    _require_normalized(profile, n, p)
    p_star = n * p / (n - p)
    m_star = _integrate(profile, n, lambda r, u, lu, du: _pth_power(u, lu, p_star), p)
    if not (m_star > 0 and math.isfinite(m_star)):
        raise DegenerateProfileError("L^{p*} mass is not finite")
    return _entropy_raw(profile, n, p), (n / p) * (p / p_star) * math.log(m_star)


def report(profile: Profile, n: int, p: float) -> FunctionalReport:
    mass = lp_mass(profile, n, p)
    energy = dirichlet(profile, n, p)
    ent = _entropy_raw(profile, n, p)
    deficit = math.nan
    if abs(mass - 1.0) <= NORMALIZATION_TOL and energy > 0:
        deficit = (n / p) * math.log(a0_constant(n, p) * energy) - ent
    prov = profile.describe() if isinstance(profile, ParametricProfile) else dict(profile.descriptor)
    return FunctionalReport(lp_mass=mass, entropy=ent, dirichlet=energy, deficit=deficit, n=n, p=p, provenance=prov)


def extremal_profile(n: int, p: float) -> ParametricProfile:
    ext = extremal_spec(n, p)
    return ParametricProfile("stretched_exp", (ext.a, ext.b, ext.s))


def random_profile(rng: np.random.Generator, family: str | None = None, max_components: int = 3) -> ParametricProfile:
    """A random member of one of the families (unnormalized)."""
    family = family or FAMILIES[rng.integers(len(FAMILIES))]
    if family == "stretched_exp":
        params = (1.0, rng.uniform(0.3, 3.0), rng.uniform(1.0, 6.0))
    elif family == "gaussian_mixture":
        k = int(rng.integers(1, max_components + 1))
        params = tuple(x for _ in range(k) for x in (rng.uniform(0.1, 1.0), rng.uniform(0.2, 5.0)))
    else:
        k = int(rng.integers(1, max_components + 1))
        params = tuple(
            x for _ in range(k) for x in (rng.uniform(0.1, 1.0), rng.uniform(0.5, 2.0), rng.uniform(2.0, 8.0))
        )
    return ParametricProfile(family, params)
