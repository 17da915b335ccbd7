"""Penalized Nash functional on normalized zonal functions of S^n.

    J(u) = (int |grad u|^p + C int u^p) (int u^q)^(p(1-theta)/(q theta)),  ||u||_p = 1

Minimizers solve

    A Delta_p u + A C u^(p-1) + ((1-theta)/theta) B u^(q-1) = (nu/theta) u^(p-1)

with A = (int u^q)^e, B = (int |grad u|^p + C)(int u^q)^(e-1), nu = J(u), and
``B int u^q = nu``.

The discrete problem uses piecewise-linear functions on a colatitude grid with
exact element weights for the energy and lumped nodal weights for the masses.
Only zonal competitors are searched, so a result is a zonal minimum; nothing here
assumes it is the minimum over all functions on S^n.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from . import numerics, sphere
from .closedform import DomainError, a0_constant, theta
from .nash import DEFAULT_FAMILY, Budget, SearchFamily, _as_budget, estimate_nash_constant, nash_exponent
from .radial import NormalizationError
from .sphere import ZonalFamily, ZonalProfile, sphere_volume

NORMALIZATION_TOL = 1e-8
EL_TOL = 1e-4
NU_RTOL = 1e-6
REGULARIZATION = 1e-8


def j_functional(profile, n: int, p: float, q: float, C: float) -> float:
    """J of a unit-mass zonal function, computed in log space."""
    mass = sphere.lp_mass(profile, n, p)
    if abs(mass ** (1.0 / p) - 1.0) > NORMALIZATION_TOL:
        raise NormalizationError(f"requires ||u||_p = 1 within {NORMALIZATION_TOL:g}, got {mass ** (1 / p)!r}")
    energy = sphere.dirichlet(profile, n, p)
    log_mq = math.log(mass) + sphere.log_mass_ratio(profile, n, p, q)
    base = energy + C * mass
    if base == 0:
        return 0.0
    return math.exp(math.log(base) + nash_exponent(n, p, q) * log_mq)


# -- discretization -----------------------------------------------------------


@dataclass(frozen=True)
class ZonalMesh:
    """P1 mesh on [0, pi] with sin^(n-1)-weighted element and nodal weights."""

    grid: np.ndarray
    n: int
    h: np.ndarray = field(init=False, repr=False)
    elem_w: np.ndarray = field(init=False, repr=False)
    node_w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid[0] != 0.0 or not math.isclose(grid[-1], math.pi) or np.any(np.diff(grid) <= 0):
            raise DomainError("mesh must increase strictly over [0, pi]")
        h = np.diff(grid)
        xg, wg = np.polynomial.legendre.leggauss(8)
        t = 0.5 * (xg[None, :] + 1.0)  # local coordinate in [0, 1]
        pts = grid[:-1, None] + h[:, None] * t
        om = sphere.surface_area(self.n)
        wt = om * np.sin(pts) ** (self.n - 1) * (0.5 * wg)[None, :] * h[:, None]
        elem_w = wt.sum(axis=1)
        node_w = np.zeros(len(grid))
        node_w[:-1] += (wt * (1.0 - t)).sum(axis=1)
        node_w[1:] += (wt * t).sum(axis=1)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "elem_w", elem_w)
        object.__setattr__(self, "node_w", node_w)

    @classmethod
    def uniform(cls, n: int, n_nodes: int = 201) -> "ZonalMesh":
        return cls(np.linspace(0.0, math.pi, n_nodes), n)

    # masses and energy with gradients -------------------------------------

    def power_mass(self, u: np.ndarray, r: float) -> tuple[float, np.ndarray]:
        pos = u > 0
        ur = np.where(pos, u, 0.0) ** r
        grad = np.zeros_like(u)
        grad[pos] = r * u[pos] ** (r - 1.0)
        return float(self.node_w @ ur), self.node_w * grad

    def energy(self, u: np.ndarray, p: float, mu: float = REGULARIZATION) -> tuple[float, np.ndarray]:
        g = np.diff(u) / self.h
        val = float(self.elem_w @ np.abs(g) ** p)
        # descent direction uses (g^2 + mu^2)^((p-2)/2) in place of |g|^(p-2)
        flux = self.elem_w * p * g * (g * g + mu * mu) ** ((p - 2.0) / 2.0) / self.h
        grad = np.zeros_like(u)
        grad[:-1] -= flux
        grad[1:] += flux
        return val, grad


@dataclass
class MinimizeResult:
    u_star: ZonalProfile
    nu: float
    A_k: float
    B_k: float
    mq: float
    dirichlet: float
    el_residual: float
    relation_nu_error: float
    iterations: int
    status: str
    j_history: list[float]
    n: int
    p: float
    q: float
    C: float

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def as_record(self) -> dict:
        return {"n": self.n, "p": self.p, "q": self.q, "C": self.C, "nu": self.nu, "A_k": self.A_k,
                "B_k": self.B_k, "el_residual": self.el_residual, "relation_nu_error": self.relation_nu_error,
                "iterations": self.iterations, "status": self.status}


def _discrete_terms(mesh: ZonalMesh, u: np.ndarray, p: float, q: float, C: float, e: float):
    mp, g_mp = mesh.power_mass(u, p)
    mq, g_mq = mesh.power_mass(u, q)
    d, g_d = mesh.energy(u, p)
    return mp, g_mp, mq, g_mq, d, g_d


def discrete_j(mesh: ZonalMesh, u: np.ndarray, p: float, q: float, C: float) -> float:
    """J of the P1 function with nodal values ``u`` after p-normalization."""
    e = nash_exponent(mesh.n, p, q)
    mp, _, mq, _, d, _ = _discrete_terms(mesh, u, p, q, C, e)
    return math.exp(math.log(d + C * mp) - math.log(mp) + e * (math.log(mq) - q / p * math.log(mp)))


def el_residual(mesh: ZonalMesh, u: np.ndarray, p: float, q: float, C: float) -> float:
    """Relative dual-norm residual of the discrete Euler-Lagrange system at ``u``.

    ``u`` is p-normalized first. Nodes held at zero only count a negative
    residual (the KKT sign condition of the constraint u >= 0).
    """
    e = nash_exponent(mesh.n, p, q)
    th = theta(mesh.n, p, q)
    u = u / mesh.power_mass(u, p)[0] ** (1.0 / p)
    mp, g_mp, mq, g_mq, d, g_d = _discrete_terms(mesh, u, p, q, C, e)
    A = mq**e
    B = (d + C * mp) * mq ** (e - 1.0)
    nu = A * (d + C * mp)
    grad_j = A * (g_d + C * g_mp) + e * B * g_mq
    r = grad_j - (nu / th) * g_mp
    r = np.where(u > 0, r, np.minimum(r, 0.0))
    scale = (nu / th) * g_mp
    return float(np.sqrt(np.sum(r * r / mesh.node_w)) / np.sqrt(np.sum(scale * scale / mesh.node_w)))


def default_init(mesh: ZonalMesh, p: float, eps: float = 0.2, weight: float = 0.1) -> np.ndarray:
    """Normalized constant plus a small bubble-shaped bump at the pole."""
    u = 1.0 + weight * np.exp(-((mesh.grid / eps) ** 2))
    return u / mesh.power_mass(u, p)[0] ** (1.0 / p)


def minimize_j(
    n: int,
    p: float,
    q: float,
    C: float,
    init: np.ndarray | ZonalProfile | None = None,
    budget: int = 5000,
    mesh: ZonalMesh | None = None,
) -> MinimizeResult:
    """Minimize J over normalized nonnegative P1 zonal functions.

    Projected quasi-Newton descent (L-BFGS-B with the bound u >= 0) on the
    0-homogeneous objective log J(u/||u||_p), in the mass-scaled coordinates
    y = sqrt(m) u so that the Euclidean gradient is the dual-norm one. Iterates
    are renormalized to unit L^p mass before they are recorded. ``budget`` caps
    the number of iterations.

    ``status`` is ``converged`` when the Euler-Lagrange residual is below 1e-4 and
    the relation ``B int u^q = nu`` holds to 1e-6, ``grid_concentrated`` when half
    of the L^p mass sits within four elements of a pole (the mesh no longer
    resolves the profile), and ``not_converged`` otherwise.
    """
    theta(n, p, q)
    if not C > 0:
        raise DomainError(f"requires C > 0 (got C={C!r})")
    mesh = mesh or ZonalMesh.uniform(n)
    e = nash_exponent(n, p, q)
    if init is None:
        v0 = default_init(mesh, p)
    elif isinstance(init, ZonalProfile):
        v0 = np.interp(mesh.grid, init.grid, init.values)
    else:
        v0 = np.asarray(init, dtype=float)
    if v0.shape != mesh.grid.shape or np.any(v0 < 0) or not np.any(v0 > 0):
        raise DomainError("init must be a nonnegative, nonzero vector on the mesh")
    v0 = v0 / mesh.power_mass(v0, p)[0] ** (1.0 / p)
    sq = np.sqrt(mesh.node_w)

    def objective(y):
        v = y / sq
        mp, g_mp, mq, g_mq, d, g_d = _discrete_terms(mesh, v, p, q, C, e)
        base = d + C * mp
        if not (mp > 0 and mq > 0 and base > 0):
            return math.inf, np.zeros_like(y)
        val = math.log(base) - math.log(mp) + e * (math.log(mq) - q / p * math.log(mp))
        grad = (g_d + C * g_mp) / base - g_mp / mp + e * (g_mq / mq - q / p * g_mp / mp)
        return val, grad / sq

    history = [discrete_j(mesh, v0, p, q, C)]

    def record(yk):
        history.append(discrete_j(mesh, yk / sq, p, q, C))

    res = optimize.minimize(
        objective, v0 * sq, jac=True, method="L-BFGS-B", bounds=[(0.0, None)] * len(v0), callback=record,
        options={"maxiter": budget, "maxfun": 4 * budget, "ftol": 1e-16, "gtol": 1e-13, "maxcor": 30},
    )
    v = res.x / sq
    u = v / mesh.power_mass(v, p)[0] ** (1.0 / p)
    mp, _, mq, _, d, _ = _discrete_terms(mesh, u, p, q, C, e)
    A = mq**e
    B = (d + C * mp) * mq ** (e - 1.0)
    nu = A * (d + C * mp)
    resid = el_residual(mesh, u, p, q, C)
    rel_nu = abs(B * mq - nu) / nu if nu > 0 else math.inf
    if pole_mass_fraction(mesh, u, p) > 0.5:
        status = "grid_concentrated"
    elif resid < EL_TOL and rel_nu < NU_RTOL:
        status = "converged"
    else:
        status = "not_converged"
    profile = ZonalProfile(mesh.grid, u, {"kind": "minimizer", "n": n, "p": p, "q": q, "C": C})
    return MinimizeResult(
        u_star=profile, nu=nu, A_k=A, B_k=B, mq=mq, dirichlet=d, el_residual=resid,
        relation_nu_error=rel_nu, iterations=int(res.nit), status=status, j_history=history,
        n=n, p=p, q=q, C=C,
    )


def pole_mass_fraction(mesh: ZonalMesh, u: np.ndarray, p: float, elements: int = 4) -> float:
    """Largest share of the discrete L^p mass carried by the nodes near either pole."""
    w = mesh.node_w * np.abs(u) ** p
    k = elements + 1
    return float(max(w[:k].sum(), w[-k:].sum()) / w.sum())


def constant_j(n: int, p: float, C: float) -> float:
    """J at the normalized constant: ``C vol^(p/n)`` (independent of q)."""
    return C * sphere_volume(n) ** (p / n)


# -- boundedness probe ---------------------------------------------------------


def nash_gap_value(fn, n: int, p: float, q: float, n_ref: float) -> float:
    """``(int u^q)^(-e) - N_ref int |grad u|^p`` for the normalized ``fn``.

    This is the least B for which the sharp Nash inequality holds at ``fn``.
    """
    u = fn.normalized(n, p)
    log_mq = sphere.log_mass_ratio(u, n, p, q) + math.log(sphere.lp_mass(u, n, p))
    return math.exp(-nash_exponent(n, p, q) * log_mq) - n_ref * sphere.dirichlet(u, n, p)


@dataclass
class BTrace:
    n: int
    p: float
    rows: list[dict]

    @property
    def running_max(self) -> list[float]:
        return [r["running_max"] for r in self.rows]

    def stabilized(self, rtol: float = 0.10, window: int = 3) -> bool:
        """Running max varies by less than ``rtol`` over the last ``window`` rows."""
        tail = self.running_max[-window:]
        return all(math.isfinite(x) for x in tail) and (max(tail) - min(tail)) < rtol * abs(max(tail))


def b_lower_trace(
    n: int,
    p: float,
    q_sequence: Sequence[float],
    family: ZonalFamily | None = None,
    budget: Budget | int = Budget(),
    seed: int = 0,
    nash_family: SearchFamily | None = DEFAULT_FAMILY,
    minimize: bool = True,
    mesh: ZonalMesh | None = None,
) -> BTrace:
    """Lower estimates of the second Nash constant B(p, q, g) on S^n as q -> p.

    For each q: N_ref is the Nash estimate over ``nash_family`` (A0(p) when that is
    None or fails), B_hat is the sup of :func:`nash_gap_value` over ``family``
    (the constant always included), and C_k = (B_hat - (p - q)) / N_ref. With
    ``minimize`` the functional J at C_k is minimized and nu reported.
    """
    budget = _as_budget(budget)
    family = family or ZonalFamily("constant")
    members = family.flatten()
    if not any(m.kind == "constant" for m in members):
        members = [ZonalFamily("constant"), *members]
    rows: list[dict] = []
    running = -math.inf
    qs = [float(q) for q in q_sequence]
    if any(b <= a for a, b in zip(qs, qs[1:])):
        raise DomainError("q_sequence must increase toward p")
    for q in qs:
        th = theta(n, p, q)
        n_ref, ref_kind = a0_constant(n, p), "A0"
        if nash_family is not None:
            est = estimate_nash_constant(n, p, q, nash_family, budget, seed)
            if est.status == "ok":
                n_ref, ref_kind = est.N_hat, "estimate"
        best = -math.inf
        for m in members:
            val, _, _, _ = numerics.multistart_maximize(
                lambda x, m=m: nash_gap_value(m.build(n, p, x), n, p, q, n_ref),
                m.bounds(), budget.restarts, budget.evals, _member_rng(seed, m),
            )
            best = max(best, val)
        c_k = (best - (p - q)) / n_ref
        running = max(running, best)
        row = {"n": n, "p": p, "q": q, "theta": th, "N_ref": n_ref, "N_ref_kind": ref_kind, "B_hat": best,
               "C_k": c_k, "running_max": running, "nu": math.nan, "nu_ref": 1.0 / a0_constant(n, p),
               "el_residual": math.nan, "status": "ok" if math.isfinite(best) else "nonfinite"}
        if minimize and math.isfinite(c_k):
            if c_k > 0:
                res = minimize_j(n, p, q, c_k, mesh=mesh)
                row.update(nu=res.nu, el_residual=res.el_residual, status=res.status)
            else:
                # far from p the shift p - q exceeds B_hat and J loses its penalty
                row.update(status="C_nonpositive")
        rows.append(row)
    return BTrace(n=n, p=p, rows=rows)


def _member_rng(seed: int, member: ZonalFamily) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(member.key.encode())])
