"""Acceptance criteria 1-13 at their stated tolerances.

Each test prints one PASS/FAIL line; the full list is repeated in the
terminal summary. Run alone with

    pytest tests/test_acceptance.py -v
"""

import math
import time

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from conftest import ACCEPTANCE
from kinklab import analysis, experiments
from kinklab.analysis import energy_norm, integrate
from kinklab.diagnostics import energy
from kinklab.evolution import EvolveConfig, evolve, evolve_linearized
from kinklab.field_core import (
    HDOT_NORM2,
    SQRT2,
    Grid,
    MovingKink,
    Orientation,
    U,
    kink_eval,
    lorentz_gamma,
    moving_kink_state,
)
from kinklab.modulation import null_background, y_solution


def report(name, ok, detail):
    ACCEPTANCE[name] = (bool(ok), detail)
    print(f"\n{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, detail


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def test_criterion_01_kink_mass():
    def mass():
        g = Grid.symmetric(40.0, 0.005)
        return integrate(kink_eval(1, g.x) ** 2, g)

    val, dt = timed(mass)
    err = abs(val - 0.3535533906)
    report("1 kink mass", err < 1e-8 and abs(val - HDOT_NORM2) < 1e-8 and dt < 1.0,
           f"||H'||^2 = {val:.12f}, error {err:.2e}, {dt:.3f} s")


def test_criterion_02_bogomolny():
    def worst():
        x = Grid.symmetric(40.0, 0.005).x
        return float(np.max(np.abs(kink_eval(1, x) - np.sqrt(2.0 * U(kink_eval(0, x))))))

    val, dt = timed(worst)
    report("2 Bogomolny identity", val < 1e-12 and dt < 1.0, f"max residual {val:.2e}, {dt:.3f} s")


def test_criterion_03_scalar_identities():
    rep, dt = timed(analysis.identity_suite)
    parts = {k: rep[k] for k in ("g_cubic_shift", "h_moment", "cubic_zero", "g_orthogonal")}
    ok = all(e.passed for e in parts.values()) and dt < 5.0
    detail = ", ".join(f"{k} err {e.error:.1e} (tol {e.tol:g})" for k, e in parts.items())
    report("3 scalar identities", ok, f"{detail}, {dt:.2f} s")


def test_criterion_04_correction_ode():
    res = experiments.g_ode_residual(dx=0.005)
    k1_dep = experiments.k1_coefficient_residual(dx=0.005)
    ok = res.max() < 1e-6 and k1_dep < 1e-10
    report("4 correction ODE", ok, f"max residual {res.max():.2e}, k1 dependence {k1_dep:.1e}")


def test_criterion_05_spectral():
    sp, dt = timed(experiments.spectral_checks, 0.01, (6.0, 9.0, 12.0), 200, 0)
    coer = [sp[f"pair_z{z}_coercivity"] for z in (6, 9, 12)]
    ok = (abs(sp["single_lambda1"]) < 5e-4 and sp["single_correlation"] > 0.9999
          and sp["pair_z12_n_below"] == 2 and all(c > 0 for c in coer)
          and sp["boosted_coercivity"] > 0 and dt < 60.0)
    report("5 spectral", ok,
           f"lambda1 {sp['single_lambda1']:.2e}, corr {sp['single_correlation']:.8f}, "
           f"z=12 modes below 1e-2: {sp['pair_z12_n_below']}, coercivity z=6/9/12 "
           f"{coer[0]:.3f}/{coer[1]:.3f}/{coer[2]:.3f}, boosted {sp['boosted_coercivity']:.3f}, {dt:.1f} s")


def test_criterion_06_modulation_ode():
    r, dt = timed(experiments.ode_checks, 0.1, 100, 20.0)
    ok = (r["fundamental_residual"] < 1e-7 and r["wronskian_error"] < 1e-10
          and r["forced_vs_rk"] < 1e-8 and dt < 10.0)
    report("6 modulation ODE", ok,
           f"L residual {r['fundamental_residual']:.1e}, Wronskian {r['wronskian_error']:.1e}, "
           f"forced vs RK {r['forced_vs_rk']:.1e}, {dt:.2f} s")


def test_criterion_07_separation_law():
    err, dt = timed(experiments.separation_law_error, (0.05, 0.1, 0.2))
    report("7 separation law", err < 1e-12 and dt < 1.0, f"max relative error {err:.1e}, {dt:.3f} s")


def boosted(dx, dt, v=0.2, t_final=50.0):
    g = Grid.from_bounds(-30.0, 45.0, dx)
    s = moving_kink_state(MovingKink(Orientation.rise01, v), 0.0, g)
    e0 = energy(s)
    out = evolve(s, EvolveConfig(dt, "fixed-vacuum"), t_final)
    gam = lorentz_gamma(v)
    y = minimize_scalar(lambda c: np.sum((out.phi - kink_eval(0, (g.x - c) / gam)) ** 2),
                        bracket=(v * t_final - 0.1, v * t_final + 0.1), tol=1e-12).x
    return abs(y - v * t_final), abs(energy(out) - e0) / e0


def test_criterion_08_evolution():
    err, drift = boosted(0.02, 0.005)
    err_fine, _ = boosted(0.01, 0.0025)
    ratio = err / err_fine
    ok = err < 0.01 and drift < 1e-6 and ratio >= 3.5
    report("8 evolution fidelity", ok,
           f"position error {err:.2e}, energy drift {drift:.1e}, refinement gain {ratio:.2f}x")


def test_criterion_09_null_directions():
    v, t_final = 0.1, 10.0
    g = Grid.symmetric(40.0, 0.01)
    errs = {}
    for kind in (0, 1):
        w0 = y_solution(kind, Orientation.rise01, v, 0.0, g)
        out = evolve_linearized(null_background(Orientation.rise01, v), w0, EvolveConfig(0.0025), t_final)
        errs[kind] = energy_norm(out - y_solution(kind, Orientation.rise01, v, t_final, g)) / energy_norm(w0)
    report("9 linearised null directions", max(errs.values()) < 1e-3,
           f"relative error Y0 {errs[0]:.1e}, Y1 {errs[1]:.1e} at t = 10")


def test_criterion_10_flux(collision_v01):
    r = collision_v01
    ok = (not r.error and r.flux_deviation < 1e-4 and r.p_plus_min_increment >= -1e-8
          and r.m_max_increment <= 1e-7)
    report("10 momentum flux and monotonicity", ok,
           f"flux deviation {r.flux_deviation:.1e}, min dP+ {r.p_plus_min_increment:.1e}, "
           f"max dM {r.m_max_increment:.1e}")


def test_criterion_11_elasticity(sweep_reports):
    s = experiments.sweep_summary(sweep_reports)
    c = s["checks"]
    parts = {
        "a gate": c["gate_all"],
        "b rel decreasing": c["rel_decreasing"],
        "c slope |nu_f-v|": c["slope_nu_ge_3"],
        "d slope radiation": c["slope_radiation_ge_2"],
        "e min separation": c["min_separation"],
    }
    rows = "; ".join(f"v={r.v:g}: dnu/v {r.dnu / r.v:.1e}, rad {r.radiation_norm:.1e}, "
                     f"sep {r.min_separation:.3f}/{r.turning_separation:.3f}" for r in sweep_reports)
    flags = ", ".join(f"({k}) {'ok' if ok else 'FAIL'}" for k, ok in parts.items())
    report("11 collision elasticity", all(parts.values()),
           f"{flags}; slope nu {s['slope_nu']:.2f}, slope radiation {s['slope_radiation']:.2f}; {rows}")


def test_criterion_12_orbital():
    rep, dt = timed(experiments.orbital_run, 0.1)
    ok = (not rep.error and rep.constant <= 100.0 and rep.y_monotone and dt <= 600.0
          and rep.y0 == pytest.approx(4 * math.log(10)) and rep.psi_norm == pytest.approx(0.1 ** 4.125))
    report("12 orbital stability", ok,
           f"sup deviation {rep.sup_deviation:.2e}, bound scale {rep.bound_scale:.2e}, C = {rep.constant:.3f}, "
           f"y monotone {rep.y_monotone}, {dt:.1f} s")


def test_criterion_13_approach_decay(collision_v01):
    r = collision_v01
    ok = r.decay_points >= 3 and r.decay_rate < 0 and -r.decay_rate >= r.v
    report("13 approach-phase decay", ok,
           f"fitted rate {r.decay_rate:.4f} over {r.decay_points} snapshots (need <= -{r.v:g}); "
           f"2 sqrt2 v = {2 * SQRT2 * r.v:.4f}")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
