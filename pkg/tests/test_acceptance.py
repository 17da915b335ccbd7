"""Acceptance criteria, each at its stated tolerance.

Every test appends one PASS/FAIL line to the shared log, which is printed in the
terminal summary. Run directly with ``python3 tests/test_acceptance.py``.
"""

import math
import sys
import time

import numpy as np
import pytest

from entropy_lab import cli
from entropy_lab import minimizer as M
from entropy_lab import nash as N
from entropy_lab import radial as R
from entropy_lab import sphere as S
from entropy_lab.closedform import a0_constant


def record(log, number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    log.append(line)
    print(line)
    return ok


def test_c01_extremal_equality(acceptance_log):
    start = time.perf_counter()
    deficits = {(n, p): R.entropy_deficit(R.extremal_profile(n, p), n, p) for n, p in [(3, 2), (4, 2), (3, 1.5), (5, 2)]}
    elapsed = time.perf_counter() - start
    worst = max(abs(d) for d in deficits.values())
    ok = worst < 1e-6 and elapsed < 5.0
    record(acceptance_log, 1, "extremal equality", ok, f"max |deficit| = {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_c02_known_constant(acceptance_log):
    value = a0_constant(3, 2) * (3 * math.pi * math.e / 2)
    ok = abs(value - 1.0) <= 1e-12
    record(acceptance_log, 2, "A0(3,2) * 3 pi e / 2", ok, f"{value!r}")
    assert ok


def test_c03_deficit_nonnegative(acceptance_log):
    rng = np.random.default_rng(20240)
    start = time.perf_counter()
    worst = math.inf
    for n in (3, 4):
        for p in (1.5, 2.0):
            for _ in range(200):
                u = R.random_profile(rng).normalized(n, p)
                worst = min(worst, R.entropy_deficit(u, n, p))
    elapsed = time.perf_counter() - start
    ok = worst >= -1e-7 and elapsed < 60.0
    record(acceptance_log, 3, "deficit nonnegativity", ok, f"min deficit over 800 = {worst:.3e}, {elapsed:.1f} s")
    assert ok


def test_c04_nash_sandwich_and_monotonicity(acceptance_log):
    qs = [1.0, 1.5, 1.8, 1.95, 1.99]
    start = time.perf_counter()
    rows = N.monotonicity_scan(3, 2.0, qs, N.DEFAULT_FAMILY, N.Budget(), seed=0)
    elapsed = time.perf_counter() - start
    a0 = a0_constant(3, 2)
    vals = [r.N_hat for r in rows]
    monotone = N.is_monotone(rows, rtol=1e-4)
    bounded = all(v <= a0 + 1e-6 for v in vals)
    near = vals[-1] >= 0.9 * a0
    ok = monotone and bounded and near and elapsed < 600.0
    shown = ", ".join(f"{v:.6f}" for v in vals)
    record(acceptance_log, 4, "Nash sandwich and monotonicity", ok,
           f"N_hat = [{shown}], A0 = {a0:.6f}, last/A0 = {vals[-1] / a0:.4f}, {elapsed:.1f} s")
    assert ok


def test_c05_limit_identity(acceptance_log):
    u = R.ParametricProfile("stretched_exp", (1.0, 1.0, 2.0)).normalized(3, 2)
    tr = N.entropy_limit_trace(u, 3, 2, [2 - 10.0**-k for k in range(1, 8)])
    errs = [r["error"] for r in tr.rows]
    reaches_floor = tr.rows[-1]["gap"] <= 1.0001e-7 and not tr.rows[-1]["flagged"]
    # exact (2/3) Ent of the unit Gaussian; the familiar -1.45163 misrounds -1.4515827
    exact = -math.log(math.pi * math.e / 2)
    ok = (
        abs(tr.target - exact) <= 1e-12
        and tr.converged
        and 0.8 <= tr.order <= 1.2
        and all(b < a for a, b in zip(errs, errs[1:]))
        and reaches_floor
    )
    record(acceptance_log, 5, "entropy limit identity", ok,
           f"target = {tr.target:.7f}, order = {tr.order:.3f}, rate = {tr.rate_constant:.4f}, "
           f"error at gap 1e-7 = {errs[-1]:.2e}")
    assert ok


def test_c06_bubble_expansions(acceptance_log):
    start = time.perf_counter()
    mass = S.expansion_fit(3, 2, observable="mass")
    energy = S.expansion_fit(3, 2, observable="energy")
    elapsed = time.perf_counter() - start
    c0, c2 = mass.fitted_coeffs
    e0 = energy.fitted_coeffs[0]
    ok = abs(c0 - 1.0) <= 1e-4 and abs(c2 + 0.25) <= 0.05 * 0.25 and abs(e0 - 3.0) <= 0.03 and elapsed < 120.0
    record(acceptance_log, 6, "bubble expansions on S^3", ok,
           f"mass c0 = {c0:.7f}, c2 = {c2:.5f}, energy c0 = {e0:.5f}, {elapsed:.1f} s")
    assert ok


def test_c07_volume_lower_bound(acceptance_log):
    res = S.b_search(3, 2, family=S.zonal_family("constant"))
    expected = (2 * math.pi**2) ** (-2 / 3)
    ok = abs(res.B_hat - expected) <= 1e-8
    record(acceptance_log, 7, "volume lower bound", ok, f"B_hat = {res.B_hat!r}, expected {expected!r}")
    assert ok


def _minimizer_runs():
    runs = []
    for n, p, q, C in [(3, 2.0, 1.9, 2.0), (3, 2.0, 1.5, 2.0), (4, 2.0, 1.8, 3.0), (3, 1.5, 1.2, 1.0), (3, 2.0, 1.9, 6.0)]:
        mesh = M.ZonalMesh.uniform(n, 201)
        for seed in range(2):
            init = np.random.default_rng(seed).uniform(0.2, 2.0, len(mesh.grid))
            runs.append((mesh, M.minimize_j(n, p, q, C, init=init, mesh=mesh)))
    return runs


def test_c08_minimizer_contracts(acceptance_log):
    runs = _minimizer_runs()
    converged = [r for _, r in runs if r.converged]
    contracts = all(r.relation_nu_error <= 1e-6 and r.el_residual < 1e-4 for r in converged)
    monotone = all(all(b <= a * (1 + 1e-12) for a, b in zip(r.j_history, r.j_history[1:])) for _, r in runs)
    ok = bool(converged) and contracts and monotone
    worst_rel = max((r.relation_nu_error for r in converged), default=math.nan)
    worst_res = max((r.el_residual for r in converged), default=math.nan)
    record(acceptance_log, 8, "minimizer contracts", ok,
           f"{len(converged)}/{len(runs)} converged, max relation error = {worst_rel:.1e}, "
           f"max EL residual = {worst_res:.1e}, monotone descent = {monotone}")
    assert ok


def test_c09_boundedness_probe(acceptance_log):
    qs = [1.5, 1.8, 1.9, 1.95, 1.99]
    tr = M.b_lower_trace(3, 2.0, qs, seed=0)
    for row in tr.rows:
        print("b_lower_trace", {k: row[k] for k in ("q", "N_ref", "B_hat", "C_k", "running_max", "nu", "status")})
    finite = all(math.isfinite(r[k]) for r in tr.rows for k in ("N_ref", "B_hat", "C_k", "running_max"))
    finite = finite and all(math.isfinite(r["nu"]) for r in tr.rows if r["status"] != "C_nonpositive")
    stable = tr.stabilized(rtol=0.10, window=3)
    ok = finite and stable
    shown = ", ".join(f"{x:.6g}" for x in tr.running_max)
    record(acceptance_log, 9, "boundedness probe", ok, f"running max = [{shown}], finite = {finite}")
    assert ok


def test_c10_determinism(acceptance_log, tmp_path):
    outputs = []
    for k in range(2):
        path = tmp_path / f"run{k}.csv"
        status = cli.main(["nash-scan", "--q-grid", "1.3,1.8", "--family", "rich", "--restarts", "2",
                           "--evals", "60", "--seed", "7", "--output", str(path)])
        outputs.append((status, path.read_bytes()))
    ok = outputs[0] == outputs[1] and len(outputs[0][1]) > 0
    record(acceptance_log, 10, "determinism", ok, f"{len(outputs[0][1])} bytes, identical = {ok}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
