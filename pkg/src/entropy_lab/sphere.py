"""Zonal functions on the unit round sphere S^n.

A zonal function depends only on the colatitude ``t`` from the north pole, which
is also the geodesic distance, so ``|grad u| = |u'(t)|`` and
``dv = omega_{n-1} sin(t)^(n-1) dt``. Scalar curvature is ``n(n-1)``.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import numerics
from .closedform import DomainError, a0_constant, extremal_spec, moments, surface_area
from .radial import DegenerateProfileError, FunctionalReport, NormalizationError

NORMALIZATION_TOL = 1e-8
DEFAULT_DELTA = 0.5
DEFAULT_EPS_GRID = (0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08)
OBSERVABLES = ("mass", "entropy", "energy")


def sphere_volume(n: int) -> float:
    """Volume of the unit round S^n."""
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    return surface_area(n + 1)


def scalar_curvature(n: int) -> float:
    return n * (n - 1.0)


@dataclass(frozen=True)
class ZonalProfile:
    """Sampled zonal function on colatitudes ``0 = t_0 < ... < t_N = pi``."""

    grid: np.ndarray
    values: np.ndarray
    descriptor: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or len(grid) < 5:
            raise DegenerateProfileError("grid and values must be equal-length 1-D arrays (>= 5 nodes)")
        if grid[0] != 0.0 or not math.isclose(grid[-1], math.pi, rel_tol=0, abs_tol=1e-12):
            raise DegenerateProfileError("grid must span [0, pi]")
        if np.any(np.diff(grid) <= 0):
            raise DegenerateProfileError("grid must increase strictly")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise DegenerateProfileError("values must be finite and nonnegative")
        if not np.any(values > 0):
            raise DegenerateProfileError("profile is identically zero")
        grid.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def scaled(self, c: float) -> "ZonalProfile":
        return ZonalProfile(self.grid, c * self.values, self.descriptor)

    def normalized(self, n: int, p: float) -> "ZonalProfile":
        return self.scaled(lp_mass(self, n, p) ** (-1.0 / p))

    @classmethod
    def constant(cls, value: float, n_nodes: int = 1001) -> "ZonalProfile":
        grid = np.linspace(0.0, math.pi, n_nodes)
        return cls(grid, np.full(n_nodes, float(value)), {"kind": "constant"})


@dataclass(frozen=True)
class BubbleSpec:
    """Cut-off, rescaled extremal ``eta(t) eps^(-n/p) u0(t/eps)`` centred at the pole."""

    n: int
    p: float
    eps: float
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if not (0.0 < self.delta < math.pi / 2):
            raise DomainError(f"cutoff radius must lie in (0, pi/2), got {self.delta}")
        if not (0.0 < self.eps <= self.delta / 4.0):
            raise DomainError(f"bubble scale must satisfy 0 < eps <= delta/4 (eps={self.eps}, delta={self.delta})")
        if not (1.0 < self.p < self.n):
            raise DomainError(f"requires 1 < p < n (got n={self.n}, p={self.p})")


def cutoff(t, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """C^1 smoothstep cutoff and its derivative: 1 on [0, delta/2], 0 beyond delta."""
    t = np.asarray(t, dtype=float)
    half = 0.5 * delta
    x = np.clip((t - half) / half, 0.0, 1.0)
    eta = 1.0 - x * x * (3.0 - 2.0 * x)
    deta = np.where((t > half) & (t < delta), -6.0 * x * (1.0 - x) / half, 0.0)
    return eta, deta


@dataclass(frozen=True)
class ZonalFunction:
    """Analytic zonal function ``amp * (const + weight * bubble)``."""

    const: float = 0.0
    weight: float = 0.0
    bubble: BubbleSpec | None = None
    amp: float = 1.0

    def __post_init__(self):
        if self.const < 0 or self.weight < 0 or not self.amp > 0:
            raise DegenerateProfileError("zonal function parts must be nonnegative")
        if self.const == 0 and (self.weight == 0 or self.bubble is None):
            raise DegenerateProfileError("zonal function is identically zero")

    def _bubble_terms(self, t: np.ndarray):
        b = self.bubble
        ext = extremal_spec(b.n, b.p)
        x = t / b.eps
        eta, deta = cutoff(t, b.delta)
        core_log = math.log(ext.a) - (b.n / b.p) * math.log(b.eps) - x**ext.s
        with np.errstate(divide="ignore"):
            log_b = np.where(eta > 0, np.log(np.where(eta > 0, eta, 1.0)) + core_log, -np.inf)
        core = np.exp(core_log)
        d_b = deta * core - eta * core * ext.s * x ** (ext.s - 1.0) / b.eps
        return log_b, d_b

    def log_and_derivative(self, t) -> tuple[np.ndarray, np.ndarray]:
        t = np.asarray(t, dtype=float)
        log_c = math.log(self.const) if self.const > 0 else -math.inf
        if self.weight > 0 and self.bubble is not None:
            log_b, d_b = self._bubble_terms(t)
            log_u = np.logaddexp(log_c, math.log(self.weight) + log_b)
            du = self.weight * d_b
        else:
            log_u = np.full_like(t, log_c)
            du = np.zeros_like(t)
        return math.log(self.amp) + log_u, self.amp * du

    def value(self, t) -> np.ndarray:
        return np.exp(self.log_and_derivative(t)[0])

    def derivative(self, t) -> np.ndarray:
        return self.log_and_derivative(t)[1]

    def breakpoints(self) -> list[float]:
        if self.bubble is None or self.weight == 0:
            return []
        e, d = self.bubble.eps, self.bubble.delta
        return [0.5 * e, e, 2 * e, 4 * e, 0.5 * d, d]

    def scaled(self, c: float) -> "ZonalFunction":
        return replace(self, amp=self.amp * c)

    def normalized(self, n: int, p: float) -> "ZonalFunction":
        return self.scaled(lp_mass(self, n, p) ** (-1.0 / p))

    def sample(self, grid: np.ndarray) -> ZonalProfile:
        return ZonalProfile(grid, self.value(grid), {"kind": "zonal_function", "const": self.const,
                                                     "weight": self.weight, "amp": self.amp})


Zonal = ZonalProfile | ZonalFunction


# -- integration --------------------------------------------------------------


def _integrate(profile: Zonal, n: int, integrand: Callable, epsabs: float = 0.0) -> float:
    """``omega_{n-1} int_0^pi integrand(u, log u, u') sin(t)^(n-1) dt``."""
    om = surface_area(n)
    if isinstance(profile, ZonalProfile):
        t = profile.grid
        u = profile.values
        with np.errstate(divide="ignore"):
            lu = np.log(u)
        du = numerics.derivative(t, u)
        vals = integrand(u, lu, du) * np.sin(t) ** (n - 1)
        return om * numerics.integrate_samples(t, vals)

    def f(t):
        ta = np.array([t])
        lu, du = profile.log_and_derivative(ta)
        return float(integrand(np.exp(lu), lu, du)[0]) * math.sin(t) ** (n - 1)

    pts = profile.breakpoints()
    upper = profile.bubble.delta if profile.const == 0 else math.pi
    return om * numerics.quad(f, 0.0, upper, pts, epsabs / om)


def _pth_power(u, lu, p):
    return np.where(u > 0, np.exp(p * np.where(u > 0, lu, 0.0)), 0.0)


def lp_mass(profile: Zonal, n: int, p: float) -> float:
    mass = _integrate(profile, n, lambda u, lu, du: _pth_power(u, lu, p))
    if not (mass > 0 and math.isfinite(mass)):
        raise DegenerateProfileError(f"L^p mass is {mass}")
    return mass


def raw_entropy(profile: Zonal, n: int, p: float) -> float:
    """``int u^p log u^p`` with no normalization requirement."""
    return _integrate(profile, n, lambda u, lu, du: np.where(u > 0, p * _pth_power(u, lu, p) * np.where(u > 0, lu, 0.0), 0.0))


def dirichlet(profile: Zonal, n: int, p: float) -> float:
    return _integrate(profile, n, lambda u, lu, du: np.abs(du) ** p)


def log_mass_ratio(profile: Zonal, n: int, p: float, q: float) -> float:
    """``log(int u^q / int u^p)``, stable as q -> p."""
    mp = lp_mass(profile, n, p)

    def excess(u, lu, du):
        safe = np.where(u > 0, lu, 0.0)
        return np.where(u > 0, np.exp(p * safe) * np.expm1((q - p) * safe), 0.0)

    # the excess changes sign where u = 1 and may nearly cancel; its natural size is |q - p| mp
    return math.log1p(_integrate(profile, n, excess, epsabs=1e-14 * abs(q - p) * mp) / mp)


def sphere_functionals(profile: Zonal, n: int, p: float, A: float | None = None, B: float = 0.0) -> FunctionalReport:
    """Mass, entropy and p-energy of a zonal function.

    ``deficit`` is ``(n/p) log(A E + B) - Ent`` (A defaults to A0(p)) when the profile
    has unit mass and the log argument is positive, else NaN.
    """
    mass = lp_mass(profile, n, p)
    ent = raw_entropy(profile, n, p)
    energy = dirichlet(profile, n, p)
    A = a0_constant(n, p) if A is None else A
    arg = A * energy + B
    deficit = math.nan
    if abs(mass - 1.0) <= NORMALIZATION_TOL and arg > 0:
        deficit = (n / p) * math.log(arg) - ent
    prov = dict(profile.descriptor) if isinstance(profile, ZonalProfile) else {"kind": "zonal_function"}
    return FunctionalReport(lp_mass=mass, entropy=ent, dirichlet=energy, deficit=deficit, n=n, p=p, provenance=prov)


# -- bubbles --------------------------------------------------------------------


def bubble_grid(spec: BubbleSpec, n_nodes: int | None = None) -> np.ndarray:
    """Uniform nodes on [0, delta] (spacing <= eps/100 by default) plus a coarse tail to pi."""
    if n_nodes is None:
        n_nodes = max(2001, int(math.ceil(100.0 * spec.delta / spec.eps)) + 1)
    inner = np.linspace(0.0, spec.delta, n_nodes)
    outer = np.linspace(spec.delta, math.pi, 33)[1:]
    return np.concatenate([inner, outer])


def make_bubble(spec: BubbleSpec, n_nodes: int | None = None) -> ZonalProfile:
    """Sample the bubble on :func:`bubble_grid`."""
    fn = ZonalFunction(weight=1.0, bubble=spec)
    prof = fn.sample(bubble_grid(spec, n_nodes))
    return ZonalProfile(prof.grid, prof.values, {"kind": "bubble", "n": spec.n, "p": spec.p,
                                                  "eps": spec.eps, "delta": spec.delta})


@dataclass
class ExpansionFit:
    observable: str
    n: int
    p: float
    eps_grid: tuple[float, ...]
    delta: float
    basis: tuple[str, ...]
    fitted_coeffs: tuple[float, ...]
    predicted_coeffs: tuple[float, ...]
    relative_error: tuple[float, ...]
    residual_rms: float
    condition_number: float
    samples: tuple[float, ...] = ()

    def as_record(self) -> dict:
        rec = {"observable": self.observable, "n": self.n, "p": self.p, "delta": self.delta,
               "eps_grid": list(self.eps_grid), "residual_rms": self.residual_rms,
               "condition_number": self.condition_number}
        for name, fit, pred, err in zip(self.basis, self.fitted_coeffs, self.predicted_coeffs, self.relative_error):
            rec[f"fitted_{name}"] = fit
            rec[f"predicted_{name}"] = pred
            rec[f"relative_error_{name}"] = err
        return rec


def bubble_observable(spec: BubbleSpec, observable: str) -> float:
    """The quantity regressed by :func:`expansion_fit` at one bubble scale.

    mass:    int u^p
    entropy: int u^p log u^p + n log eps
    energy:  eps^p int |grad u|^p
    """
    fn = ZonalFunction(weight=1.0, bubble=spec)
    n, p, eps = spec.n, spec.p, spec.eps
    if observable == "mass":
        return lp_mass(fn, n, p)
    if observable == "entropy":
        return raw_entropy(fn, n, p) + n * math.log(eps)
    if observable == "energy":
        return eps**p * dirichlet(fn, n, p)
    raise DomainError(f"unknown observable {observable!r}; choose from {OBSERVABLES}")


def predicted_coefficients(n: int, p: float, observable: str) -> tuple[tuple[str, ...], tuple[float, ...]]:
    m = moments(n, p)
    k = scalar_curvature(n) / (6.0 * n)
    if observable == "mass":
        return ("c0", "c2"), (1.0, -k * m.J1)
    if observable == "entropy":
        return ("c0", "c2", "c2log"), (m.I1, -k * m.J3, scalar_curvature(n) / 6.0 * m.J1)
    if observable == "energy":
        return ("c0", "c2"), (m.I2, -k * m.J2)
    raise DomainError(f"unknown observable {observable!r}; choose from {OBSERVABLES}")


def expansion_fit(
    n: int,
    p: float,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    observable: str = "mass",
    delta: float = DEFAULT_DELTA,
) -> ExpansionFit:
    """Least-squares fit of a bubble observable to its small-eps model.

    mass, energy: c0 + c2 eps^2;  entropy: c0 + c2 eps^2 + c2log eps^2 log eps
    (the -n log eps term is removed before fitting).
    """
    eps = np.array(sorted(float(e) for e in eps_grid))
    if len(eps) < 6:
        raise DomainError("expansion fit needs at least 6 bubble scales")
    basis, predicted = predicted_coefficients(n, p, observable)
    y = np.array([bubble_observable(BubbleSpec(n, p, float(e), delta), observable) for e in eps])
    cols = [np.ones_like(eps), eps**2]
    if observable == "entropy":
        cols.append(eps**2 * np.log(eps))
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rel = tuple(abs(c - pr) / abs(pr) if pr != 0 else abs(c) for c, pr in zip(coef, predicted))
    return ExpansionFit(
        observable=observable, n=n, p=p, eps_grid=tuple(float(e) for e in eps), delta=delta, basis=basis,
        fitted_coeffs=tuple(float(c) for c in coef), predicted_coeffs=tuple(predicted),
        relative_error=tuple(float(r) for r in rel), residual_rms=float(np.sqrt(np.mean(resid**2))),
        condition_number=float(np.linalg.cond(X)), samples=tuple(float(v) for v in y),
    )


# -- second-constant search ------------------------------------------------------


@dataclass(frozen=True)
class ZonalFamily:
    """Zonal test functions searched by :func:`b_search`.

    kind:
      ``constant``              the normalized constant only
      ``bubble``                x = [log eps]
      ``constant_plus_bubble``  x = [log weight, log eps]: 1 + weight * bubble
      ``union``                 maximum over ``members``
    """

    kind: str
    eps_range: tuple[float, float] = (0.005, DEFAULT_DELTA / 4.0)
    delta: float = DEFAULT_DELTA
    members: tuple["ZonalFamily", ...] = ()

    @property
    def key(self) -> str:
        if self.kind == "union":
            return "union(" + ",".join(m.key for m in self.members) + ")"
        return self.kind

    def bounds(self) -> list[tuple[float, float]]:
        le = (math.log(self.eps_range[0]), math.log(self.eps_range[1]))
        if self.kind == "bubble":
            return [le]
        if self.kind == "constant_plus_bubble":
            return [(-6.0, 3.0), le]
        return []

    def _eps(self, log_eps: float) -> float:
        # exp(log(delta/4)) may round above delta/4
        return min(max(math.exp(log_eps), self.eps_range[0]), self.eps_range[1])

    def build(self, n: int, p: float, x: Sequence[float]) -> ZonalFunction:
        if self.kind == "constant":
            return ZonalFunction(const=1.0)
        if self.kind == "bubble":
            return ZonalFunction(weight=1.0, bubble=BubbleSpec(n, p, self._eps(x[0]), self.delta))
        if self.kind == "constant_plus_bubble":
            return ZonalFunction(const=1.0, weight=math.exp(x[0]), bubble=BubbleSpec(n, p, self._eps(x[1]), self.delta))
        raise DomainError(f"cannot build a member of {self.kind!r}")

    def flatten(self) -> list["ZonalFamily"]:
        if self.kind == "union":
            return [f for m in self.members for f in m.flatten()]
        return [self]


def zonal_family(name: str) -> ZonalFamily:
    if name in ("constant", "bubble", "constant_plus_bubble"):
        return ZonalFamily(name)
    if name == "rich":
        return ZonalFamily("union", members=(ZonalFamily("constant"), ZonalFamily("bubble"),
                                             ZonalFamily("constant_plus_bubble")))
    raise DomainError(f"unknown zonal family {name!r}")


@dataclass
class BSearchResult:
    n: int
    p: float
    A: float
    B_hat: float
    family: str
    argmax_member: str
    argmax_params: tuple[float, ...]
    volume_bound: float
    curvature_reference: float
    evals: int
    status: str

    def as_record(self) -> dict:
        return {"n": self.n, "p": self.p, "A": self.A, "B_hat": self.B_hat, "family": self.family,
                "argmax_member": self.argmax_member,
                "argmax_params": " ".join(repr(float(x)) for x in self.argmax_params),
                "volume_bound": self.volume_bound, "curvature_reference": self.curvature_reference,
                "evals": self.evals, "status": self.status}


def entropy_gap_value(fn: ZonalFunction, n: int, p: float, A: float) -> float:
    """``exp((p/n) Ent(u^p)) - A int |grad u|^p`` for the normalized ``fn``."""
    u = fn.normalized(n, p)
    return math.exp(p / n * raw_entropy(u, n, p)) - A * dirichlet(u, n, p)


def b_search(
    n: int,
    p: float,
    A: float | None = None,
    family: ZonalFamily | None = None,
    budget=None,
    seed: int = 0,
) -> BSearchResult:
    """Smallest B making L(A, B) hold on the family: sup of :func:`entropy_gap_value`.

    The normalized constant is always a member, so the result is at least
    ``vol(S^n)^(-p/n)``.
    """
    from .nash import Budget, _as_budget

    budget = _as_budget(budget) if budget is not None else Budget()
    A = a0_constant(n, p) if A is None else A
    if not A > 0:
        raise DomainError("A must be positive")
    family = family or ZonalFamily("constant")
    members = family.flatten()
    if not any(m.kind == "constant" for m in members):
        members = [ZonalFamily("constant"), *members]
    best_val, best_x, best_key, evals, bad = -math.inf, None, "", 0, 0
    for m in members:
        rng = np.random.default_rng([seed, zlib.crc32(m.key.encode())])
        val, x, e, b = numerics.multistart_maximize(
            lambda x, m=m: entropy_gap_value(m.build(n, p, x), n, p, A),
            m.bounds(), budget.restarts, budget.evals, rng,
        )
        evals += e
        bad += b
        if x is not None and numerics.is_better(val, x, best_val, best_x):
            best_val, best_x, best_key = val, x, m.key
    status = "ok" if best_x is not None else "nonfinite"
    return BSearchResult(
        n=n, p=p, A=A, B_hat=best_val, family=family.key, argmax_member=best_key,
        argmax_params=tuple(best_x or ()), volume_bound=sphere_volume(n) ** (-p / n),
        curvature_reference=scalar_curvature(n) / (2 * n * math.pi * math.e),
        evals=evals, status=status if not bad else f"{status}; {bad} non-finite evaluations",
    )
