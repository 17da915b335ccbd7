"""Euclidean L^p Nash quotients and lower-bound estimates of N(p, q)."""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from . import numerics, radial
from .closedform import DomainError, a0_constant, theta
from .radial import ParametricProfile, Profile

PRECISION_FLOOR = 1e-7


@dataclass(frozen=True)
class Budget:
    restarts: int = 8
    evals: int = 400

    def __post_init__(self):
        if self.restarts < 1 or self.evals < 1:
            raise ValueError("budget needs at least one restart and one evaluation")


def _as_budget(budget) -> Budget:
    if isinstance(budget, Budget):
        return budget
    return Budget(restarts=int(budget))


# -- quotient -----------------------------------------------------------------


def nash_exponent(n: int, p: float, q: float) -> float:
    th = theta(n, p, q)
    return p * (1.0 - th) / (q * th)


def log_nash_quotient(profile: Profile, n: int, p: float, q: float) -> float:
    th = theta(n, p, q)
    if not p < n:
        raise DomainError("requires p < n")
    mass = radial.lp_mass(profile, n, p)
    energy = radial.dirichlet(profile, n, p)
    if not energy > 0:
        raise radial.DegenerateProfileError("zero Dirichlet energy")
    log_mq = math.log(mass) + radial.log_mass_ratio(profile, n, p, q)
    return math.log(mass) / th - math.log(energy) - nash_exponent(n, p, q) * log_mq


def nash_quotient(profile: Profile, n: int, p: float, q: float) -> float:
    """``(int u^p)^(1/theta) / (int |grad u|^p (int u^q)^(p(1-theta)/(q theta)))``."""
    return math.exp(log_nash_quotient(profile, n, p, q))


def jensen_gap(profile: Profile, n: int, p: float, q: float) -> float:
    """``((p-q)/p) Ent(u^p) + log int u^q`` for unit-mass u; never negative."""
    ent = radial.entropy(profile, n, p)
    return (p - q) / p * ent + radial.log_mass_ratio(profile, n, p, q)


# -- search families ----------------------------------------------------------


@dataclass(frozen=True)
class SearchFamily:
    """A finite-dimensional box of radial profiles searched by the optimizer.

    The amplitude/dilation gauge is pinned (first component has unit weight and
    unit rate) since the Nash quotient is invariant under it.

    kind:
      ``stretched_exp``     x = [s]                        -> exp(-r^s)
      ``gaussian_mixture``  x = [log w_i, log b_i]_{i>=2}  -> e^{-r^2} + sum w_i e^{-b_i r^2}
      ``bump_mixture``      x = [m_1, (log w_i, log R_i, m_i)_{i>=2}]
      ``fixed``             no parameters; ``profile`` is the only member
      ``union``             maximum over ``members``
    """

    kind: str
    components: int = 1
    s_range: tuple[float, float] = (1.0, 8.0)
    profile: ParametricProfile | None = None
    members: tuple["SearchFamily", ...] = ()

    @property
    def key(self) -> str:
        if self.kind == "union":
            return "union(" + ",".join(m.key for m in self.members) + ")"
        if self.kind == "fixed":
            return f"fixed({self.profile.family}:{','.join(map(repr, self.profile.params))})"
        if self.kind == "stretched_exp":
            return f"stretched_exp[{self.s_range[0]:g},{self.s_range[1]:g}]"
        return f"{self.kind}{self.components}"

    def bounds(self) -> list[tuple[float, float]]:
        if self.kind == "stretched_exp":
            return [self.s_range]
        if self.kind == "gaussian_mixture":
            return [(-4.0, 4.0), (math.log(0.05), math.log(20.0))] * (self.components - 1)
        if self.kind == "bump_mixture":
            return [(2.0, 24.0)] + [(-4.0, 4.0), (math.log(0.2), math.log(5.0)), (2.0, 24.0)] * (
                self.components - 1
            )
        return []

    @property
    def dim(self) -> int:
        return len(self.bounds())

    def build(self, x: Sequence[float]) -> ParametricProfile:
        x = [float(v) for v in x]
        if self.kind == "stretched_exp":
            return ParametricProfile("stretched_exp", (1.0, 1.0, x[0]))
        if self.kind == "gaussian_mixture":
            params = [1.0, 1.0]
            for i in range(0, len(x), 2):
                params += [math.exp(x[i]), math.exp(x[i + 1])]
            return ParametricProfile("gaussian_mixture", tuple(params))
        if self.kind == "bump_mixture":
            params = [1.0, 1.0, x[0]]
            for i in range(1, len(x), 3):
                params += [math.exp(x[i]), math.exp(x[i + 1]), x[i + 2]]
            return ParametricProfile("bump_mixture", tuple(params))
        if self.kind == "fixed":
            return self.profile
        raise DomainError(f"cannot build a member of {self.kind!r}")


def family(name: str, components: int = 2) -> SearchFamily:
    """Named search families used by the CLI and the tests."""
    if name == "stretched_exp":
        return SearchFamily("stretched_exp")
    if name in ("gaussian_mixture", "bump_mixture"):
        return SearchFamily(name, components=components)
    if name == "rich":
        return union(SearchFamily("stretched_exp"), SearchFamily("gaussian_mixture", components=components))
    raise DomainError(f"unknown search family {name!r}")


def fixed(profile: ParametricProfile) -> SearchFamily:
    return SearchFamily("fixed", profile=profile)


def union(*members: SearchFamily) -> SearchFamily:
    return SearchFamily("union", members=tuple(members))


DEFAULT_FAMILY = SearchFamily("stretched_exp")


# -- estimation ---------------------------------------------------------------


@dataclass
class NashScanRow:
    n: int
    p: float
    q: float
    theta: float
    N_hat: float
    A0: float
    argmax_params: tuple[float, ...]
    status: str
    seed: int
    evals: int
    family: str = ""
    flags: list[str] = field(default_factory=list)

    def as_record(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "theta": self.theta,
            "N_hat": self.N_hat,
            "A0": self.A0,
            "seed": self.seed,
            "evals": self.evals,
            "status": self.status,
            "family": self.family,
            "argmax_params": " ".join(repr(float(x)) for x in self.argmax_params),
        }


def _rng(seed: int, fam: SearchFamily) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(fam.key.encode())])


def _search(n, p, q, fam: SearchFamily, budget: Budget, seed: int):
    """Return (log N_hat, argmax x, member key, evaluations, non-finite count)."""
    if fam.kind == "union":
        best_val, best_x, best_key = -math.inf, None, fam.key
        evals = bad = 0
        for member in fam.members:
            val, x, key, e, b = _search(n, p, q, member, budget, seed)
            evals += e
            bad += b
            if x is not None and numerics.is_better(val, x, best_val, best_x):
                best_val, best_x, best_key = val, x, key
        return best_val, best_x, best_key, evals, bad

    val, x, evals, bad = numerics.multistart_maximize(
        lambda x: log_nash_quotient(fam.build(x), n, p, q),
        fam.bounds(),
        budget.restarts,
        budget.evals,
        _rng(seed, fam),
    )
    return val, x, fam.key, evals, bad


def estimate_nash_constant(
    n: int,
    p: float,
    q: float,
    fam: SearchFamily = DEFAULT_FAMILY,
    budget: Budget | int = Budget(),
    seed: int = 0,
) -> NashScanRow:
    """Lower bound for N(p, q): the largest Nash quotient found in ``fam``.

    Multi-start bounded Nelder-Mead; restarts are seeded from ``(seed, family)``.
    A non-finite optimum is flagged in ``status`` rather than raised.
    """
    budget = _as_budget(budget)
    th = theta(n, p, q)
    a0 = a0_constant(n, p)
    log_n, x, key, evals, bad = _search(n, p, q, fam, budget, seed)
    flags = []
    if x is None or not math.isfinite(log_n):
        status = "nonfinite"
        n_hat = math.nan
        x = ()
    else:
        n_hat = math.exp(log_n)
        status = "ok"
        if n_hat > a0 + 1e-6:
            status = "bound_violation"
    if bad:
        flags.append(f"{bad} non-finite evaluations")
    return NashScanRow(
        n=n, p=p, q=q, theta=th, N_hat=n_hat, A0=a0, argmax_params=tuple(x),
        status=status, seed=seed, evals=evals, family=key, flags=flags,
    )


def _scan_one(args):
    return estimate_nash_constant(*args)


def monotonicity_scan(
    n: int,
    p: float,
    q_grid: Sequence[float],
    fam: SearchFamily = DEFAULT_FAMILY,
    budget: Budget | int = Budget(),
    seed: int = 0,
    workers: int | None = None,
) -> list[NashScanRow]:
    """Estimate N(p, q) along an increasing q-grid; rows come back in q order."""
    q_grid = [float(q) for q in q_grid]
    if any(b <= a for a, b in zip(q_grid, q_grid[1:])):
        raise DomainError("q_grid must be strictly increasing")
    for q in q_grid:
        theta(n, p, q)
    jobs = [(n, p, q, fam, _as_budget(budget), seed) for q in q_grid]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_scan_one, jobs))
    return [_scan_one(j) for j in jobs]


def is_monotone(rows: Sequence[NashScanRow], rtol: float = 1e-4) -> bool:
    vals = [r.N_hat for r in rows]
    return all(b >= a * (1.0 - rtol) for a, b in zip(vals, vals[1:]))


# -- q -> p limit -------------------------------------------------------------


@dataclass
class LimitTrace:
    n: int
    p: float
    target: float
    rows: list[dict]
    rate_constant: float
    order: float
    converged: bool

    def as_records(self) -> list[dict]:
        return [{"n": self.n, "p": self.p, "target": self.target, **r} for r in self.rows]


def entropy_limit_trace(profile: Profile, n: int, p: float, q_sequence: Sequence[float]) -> LimitTrace:
    """Trace ``(p^3/n) (p-q)^-1 log(||u||_p/||u||_q)`` toward ``(p/n) Ent(u^p)``.

    Rows closer to p than the 1e-7 precision floor are kept but flagged and
    excluded from the rate fit.
    """
    ent = radial.entropy(profile, n, p)
    target = p / n * ent
    qs = [float(q) for q in q_sequence]
    if any(b <= a for a, b in zip(qs, qs[1:])):
        raise DomainError("q_sequence must increase toward p")
    rows = []
    for q in qs:
        theta(n, p, q)
        gap = p - q
        # ||u||_p = 1, so log(||u||_p/||u||_q) = -(1/q) log int u^q
        log_ratio = -radial.log_mass_ratio(profile, n, p, q) / q
        value = p**3 / n * log_ratio / gap
        rows.append({
            "q": q,
            "gap": gap,
            "value": value,
            "error": abs(value - target),
            "flagged": gap < PRECISION_FLOOR,
        })
    usable = [r for r in rows if not r["flagged"] and r["error"] > 0]
    if len(usable) >= 2:
        h = np.log([r["gap"] for r in usable])
        e = np.log([r["error"] for r in usable])
        order = float(np.polyfit(h, e, 1)[0])
        rate = float(np.median([r["error"] / r["gap"] for r in usable]))
        last = usable[-1]
        converged = 0.8 <= order <= 1.2 and last["error"] <= 2.0 * rate * last["gap"]
    else:
        order, rate, converged = math.nan, math.nan, False
    return LimitTrace(n=n, p=p, target=target, rows=rows, rate_constant=rate, order=order, converged=converged)
