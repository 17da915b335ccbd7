"""Shared quadrature and finite-difference helpers."""

from __future__ import annotations

import math
import warnings
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

QUAD_EPSREL = 1e-13
QUAD_LIMIT = 400


def quad(
    f: Callable[[float], float], a: float, b: float, points: Sequence[float] = (), epsabs: float = 0.0
) -> float:
    """Adaptive Gauss-Kronrod integral of ``f`` on ``[a, b]``.

    Interior breakpoints outside ``(a, b)`` are dropped and near-duplicates merged.
    The interval is split at the breakpoints and each piece integrated separately
    so that QUADPACK sees the scale of every component. ``epsabs`` is shared out over the pieces.
    """
    edges = [a]
    for x in sorted(float(x) for x in points if a < x < b):
        # merge near-coincident cuts; a sliver piece only confuses the error estimate
        if x - edges[-1] > 1e-9 * (b - a):
            edges.append(x)
    if b - edges[-1] <= 1e-9 * (b - a):
        edges.pop()
    edges.append(b)
    piece_abs = epsabs / (len(edges) - 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", integrate.IntegrationWarning)
            val, _ = integrate.quad(f, lo, hi, epsabs=piece_abs, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)
        for w in caught:
            # the 1e-13 target sits at double-precision roundoff; that report is expected
            if not (issubclass(w.category, integrate.IntegrationWarning) and "roundoff" in str(w.message)):
                warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
        total += val
    return total


def xlogx(t: np.ndarray | float) -> np.ndarray | float:
    """``t log t`` with the continuous extension ``0 log 0 = 0``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = t[pos] * np.log(t[pos])
    return out if out.ndim else float(out)


def derivative(x: np.ndarray, y: np.ndarray, width: int = 5) -> np.ndarray:
    """First derivative of samples on a nonuniform grid.

    Central ``width``-point stencils in the interior, one-sided ones at the ends.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n < width:
        raise ValueError(f"need at least {width} grid nodes, got {n}")
    half = width // 2
    starts = np.clip(np.arange(n) - half, 0, n - width)
    idx = starts[:, None] + np.arange(width)[None, :]
    dx = x[idx] - x[:, None]
    # unit-width stencils keep the Taylor moment matrices well conditioned
    h = np.abs(dx).max(axis=1)
    fact = np.array([math.factorial(k) for k in range(width)], dtype=float)
    V = (dx / h[:, None])[:, None, :] ** np.arange(width)[None, :, None] / fact[None, :, None]
    rhs = np.zeros((n, width, 1))
    rhs[:, 1, 0] = 1.0
    w = np.linalg.solve(V, rhs)[..., 0] / h[:, None]
    return np.einsum("ij,ij->i", w, y[idx])


def integrate_samples(x: np.ndarray, y: np.ndarray) -> float:
    """Composite Simpson integral of samples on a nonuniform grid."""
    return float(integrate.simpson(y, x=x))


def geometric_grid(r_max: float, n_nodes: int, stretch: float = 2.0) -> np.ndarray:
    """Nodes on ``[0, r_max]`` whose spacing grows geometrically outward.

    Consecutive spacings have the constant ratio ``exp(stretch / n_nodes)``, so the
    grid is fine near the origin and coarse in the tail.
    """
    if n_nodes < 5:
        raise ValueError("grid needs at least 5 nodes")
    t = np.linspace(0.0, 1.0, n_nodes)
    if stretch == 0:
        return r_max * t
    return r_max * np.expm1(stretch * t) / math.expm1(stretch)


GAUGE_TOL = 1e-12


def is_better(val, x, best_val, best_x) -> bool:
    if best_x is None or val > best_val + GAUGE_TOL:
        return True
    return abs(val - best_val) <= GAUGE_TOL and tuple(x) < tuple(best_x)


def multistart_maximize(
    objective: Callable[[np.ndarray], float],
    bounds: Sequence[tuple[float, float]],
    restarts: int,
    evals: int,
    rng: np.random.Generator,
):
    """Bounded Nelder-Mead from ``restarts`` uniform random starts.

    Returns ``(best value, best x, evaluations, non-finite evaluations)``. Non-finite
    objective values count as failures and are never selected. Values within 1e-12
    tie and the lexicographically smallest ``x`` wins.
    """
    counter = {"evals": 0, "bad": 0}

    def neg(x):
        counter["evals"] += 1
        try:
            val = float(objective(x))
        except (ValueError, ZeroDivisionError, OverflowError, FloatingPointError):
            val = math.nan
        if not math.isfinite(val):
            counter["bad"] += 1
            return math.inf
        return -val

    if not bounds:
        val = -neg(np.zeros(0))
        x = () if math.isfinite(val) else None
        return val, x, counter["evals"], counter["bad"]

    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    best_val, best_x = -math.inf, None
    for _ in range(restarts):
        res = optimize.minimize(
            neg,
            rng.uniform(lo, hi),
            method="Nelder-Mead",
            bounds=list(bounds),
            options={"maxfev": evals, "xatol": 1e-9, "fatol": 1e-13},
        )
        if math.isfinite(res.fun) and is_better(-res.fun, list(res.x), best_val, best_x):
            best_val, best_x = -float(res.fun), [float(v) for v in res.x]
    x = tuple(best_x) if best_x is not None else None
    return best_val, x, counter["evals"], counter["bad"]
