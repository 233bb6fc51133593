"""Experiment bodies behind the command line: collisions, sweeps, the
orbital run, residual tables and the verification suite.

Each function returns plain data (dataclasses or dicts) and writes nothing
unless given an output directory; cli.py owns configuration and exit codes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import analysis, diagnostics, mod_ode, spectral_lab
from .ansatz import AnsatzParams, ansatz_state, free_pair_centre, residual_norm
from .evolution import EvolveConfig, evolve, DivergenceError
from .field_core import (
    SQRT2,
    FieldPair,
    Grid,
    U,
    ddU,
    dU,
    exp_minus_sqrt2_d,
    g_correction,
    kink_eval,
    kink_pair_fields,
    kink_pair_state,
    odd_extension,
    separation,
)
from .modulation import VelocityTracker, WindowError

CORE_EXCLUSION = 8.0
GATE_FRACTION = 0.2


def default_span(v):
    return 3.0 * math.log(1.0 / v) / v


def turning_separation(v):
    """(1/sqrt2) ln(8/v^2), the separation at the bounce."""
    return math.log(8.0 / v ** 2) / SQRT2


def windowed_energy_norm(kappa, y, exclusion=CORE_EXCLUSION):
    """Energy norm of a half-line residual away from the kink cores, on the whole line.

    Keeps |x| <= y - exclusion and |x| >= y + exclusion.
    """
    full = odd_extension(kappa)
    g = full.grid
    ax = np.abs(g.x)
    mask = (ax <= y - exclusion) | (ax >= y + exclusion)
    px = analysis.d1(full.phi, g.dx)
    dens = full.phi ** 2 + px ** 2 + full.pi ** 2
    return float(np.sqrt(g.dx * np.sum(dens[mask])))


def kink_crossing(state):
    """Right kink centre from the crossing phi = 1/sqrt2 (half-line or full grid)."""
    g = state.grid
    i0 = g.index_of_zero()
    phi = state.phi[i0:]
    x = g.x[i0:]
    level = 1.0 / SQRT2
    idx = np.nonzero(phi >= level)[0]
    if idx.size == 0 or idx[0] == 0:
        return float("nan")
    k = idx[0]
    f0, f1 = phi[k - 1], phi[k]
    return float(x[k - 1] + (level - f0) / (f1 - f0) * (x[k] - x[k - 1]))


def loglog_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


# ---------------------------------------------------------------- collisions


@dataclass
class CollisionReport:
    v: float
    dx: float
    dt: float
    length: float
    t_span: float
    v_in: float = float("nan")
    nu_f: float = float("nan")
    dnu: float = float("nan")  # |nu_f - v|
    dnu_in: float = float("nan")  # |nu_f - v_in|
    nu_drift: float = float("nan")
    radiation_norm: float = float("nan")
    radiation_global: float = float("nan")
    energy_drift: float = float("nan")
    min_separation: float = float("nan")
    turning_separation: float = float("nan")
    flux_deviation: float = float("nan")
    p_plus_min_increment: float = float("nan")
    m_max_increment: float = float("nan")
    decay_rate: float = float("nan")
    decay_points: int = 0
    centre_intercept: float = float("nan")
    fit_points: int = 0
    window_start: float = float("nan")
    runtime: float = 0.0
    error: str = ""
    gate_nu_f: float = float("nan")
    gate_passed: bool | None = None

    @property
    def resolution_limited(self):
        return self.gate_passed is False

    def to_dict(self):
        d = asdict(self)
        d["resolution_limited"] = self.resolution_limited
        return d


class _CollisionMonitor:
    """Consumes snapshots during a collision run."""

    def __init__(self, v, t_span, keep_records=True):
        self.v = v
        self.T = t_span
        self.records = []
        self.min_sep = math.inf
        self.threshold = turning_separation(v) + 4.0
        self.decay_lo = math.log(1.0 / v) / v
        self.decay_hi = 2.0 * self.decay_lo
        self.decay_t, self.decay_n = [], []
        self.incoming = None
        self.outgoing = None
        self.in_open = True
        self.error = ""
        self.window_start = math.nan

    def _radiation(self, r):
        return windowed_energy_norm(r.kappa, r.y_hat)

    def __call__(self, s):
        v = self.v
        self.records.append(diagnostics.record(s, v))
        y = kink_crossing(s)
        sep = 2.0 * y
        self.min_sep = min(self.min_sep, sep)
        if self.error:
            return
        try:
            if s.t < 0:
                if -self.decay_hi <= s.t <= -self.decay_lo:
                    self.decay_t.append(-s.t)
                    self.decay_n.append(self._free_pair_distance(s))
                if self.in_open and sep >= self.threshold:
                    if self.incoming is None:
                        self.incoming = VelocityTracker(v, y)
                    # time reversal turns the approach into a separation
                    self.incoming.add(FieldPair(-s.t, s.phi, -s.pi, s.grid))
                else:
                    self.in_open = False
            elif sep >= self.threshold:
                if self.outgoing is None:
                    self.outgoing = VelocityTracker(v, y, extra=self._radiation)
                    self.window_start = s.t
                self.outgoing.add(s)
        except WindowError as exc:
            self.error = str(exc)

    def _free_pair_distance(self, s):
        c = free_pair_centre(self.v, s.t)
        full = odd_extension(s)
        p, q = kink_pair_fields(-self.v, c, full.grid.x)
        return analysis.energy_norm(FieldPair(s.t, full.phi - p, full.pi - q, full.grid))


def collision_run(v, dx=0.02, dt=0.005, length=260.0, t_span=None, record_dt=0.5,
                  boundary="odd-half-line", series_path=None, diag_path=None):
    """Ansatz data at -T, evolved through the bounce to +T, then fitted."""
    t0 = time.perf_counter()
    T = default_span(v) if t_span is None else t_span
    rep = CollisionReport(v, dx, dt, length, T, turning_separation=turning_separation(v))
    if boundary == "odd-half-line":
        grid = Grid.from_bounds(0.0, length, dx)
    else:
        grid = Grid.symmetric(length, dx)
    state = ansatz_state(AnsatzParams(v), -T, grid)
    mon = _CollisionMonitor(v, T)
    every = max(1, int(round(record_dt / dt)))
    try:
        evolve(state, EvolveConfig(dt, boundary, every), T, mon)
    except DivergenceError as exc:
        rep.error = str(exc)
        rep.runtime = time.perf_counter() - t0
        return rep

    recs = mon.records
    e = np.array([r.E for r in recs])
    rep.energy_drift = float(np.max(np.abs(e - e[0])) / abs(e[0]))
    rep.flux_deviation, rep.p_plus_min_increment = diagnostics.flux_check(recs)
    rep.m_max_increment = float(np.max(np.diff([r.M_lyap for r in recs])))
    rep.min_separation = float(mon.min_sep)
    if len(mon.decay_t) >= 3:
        slope = np.polyfit(mon.decay_t, np.log(mon.decay_n), 1)[0]
        rep.decay_rate = float(slope)
        rep.decay_points = len(mon.decay_t)
    if diag_path is not None:
        diagnostics.write_records_csv(diag_path, recs)

    rep.error = mon.error
    rep.window_start = mon.window_start
    if mon.outgoing is None or mon.incoming is None:
        rep.error = rep.error or "kinks never reached the fitting separation"
    if rep.error:
        rep.runtime = time.perf_counter() - t0
        return rep
    out = mon.outgoing.finish()
    inc = mon.incoming.finish()
    rep.fit_points = len(out.t)
    rep.nu_f = out.nu_f
    rep.nu_drift = out.drift
    rep.v_in = inc.nu_f
    rep.dnu = abs(out.nu_f - v)
    rep.dnu_in = abs(out.nu_f - inc.nu_f)
    q = max(1, len(out.t) // 4)
    order = np.argsort(mon.outgoing.ts)
    rad = np.array(mon.outgoing.extra)[order]
    rep.radiation_norm = float(rad[-q:].max())
    rep.radiation_global = float(out.kappa_norm[-q:].max())
    tail_t, tail_y = out.t[-q:], out.y_hat[-q:]
    rep.centre_intercept = float(np.median(2.0 * tail_y - 2.0 * out.nu_f * tail_t))
    if series_path is not None:
        out.write_csv(series_path)
    rep.runtime = time.perf_counter() - t0
    return rep


def collision_with_gate(v, dx=0.02, dt=0.005, gate=True, **kw):
    """Run at (dx, dt) and, for the gate, again at (dx/2, dt/2).

    The gate passes when the two nu_f differ by less than 20% of |nu_f - v|.
    """
    rep = collision_run(v, dx, dt, **kw)
    if gate and not rep.error:
        kw = {k: val for k, val in kw.items() if k not in ("series_path", "diag_path")}
        fine = collision_run(v, dx / 2.0, dt / 2.0, **kw)
        if fine.error:
            rep.gate_passed = False
        else:
            rep.gate_nu_f = fine.nu_f
            rep.gate_passed = bool(abs(fine.nu_f - rep.nu_f) < GATE_FRACTION * rep.dnu)
    return rep


def collision_checks(rep):
    """Per-run acceptance for a single collision."""
    v = rep.v
    return {
        "energy_drift": rep.energy_drift < 1e-6,
        "flux_law": rep.flux_deviation < 1e-4,
        "p_plus_monotone": rep.p_plus_min_increment > -1e-8,
        "lyapunov_monotone": rep.m_max_increment < 1e-7,
        "elastic_speed": abs(rep.nu_f - v) / v < 0.05,
        "radiation_small": rep.radiation_norm < 0.1 * v * v,
        "min_separation": abs(rep.min_separation - rep.turning_separation) <= 0.15 * rep.turning_separation,
        "fit_ok": not rep.error,
    }


def sweep_summary(reports):
    """Slopes and the elasticity checks over a list of CollisionReports (any order)."""
    reps = sorted(reports, key=lambda r: r.v)
    usable = [r for r in reps if not r.error and not r.resolution_limited]
    vs = [r.v for r in usable]
    rel = [r.dnu / r.v for r in usable]
    slope_nu = loglog_slope(vs, [r.dnu for r in usable])
    slope_rad = loglog_slope(vs, [r.radiation_norm for r in usable])
    checks = {
        "gate_all": all(r.gate_passed is True for r in reps),
        "rel_decreasing": len(usable) == len(reps) and all(a < b for a, b in zip(rel, rel[1:])),
        "slope_nu_ge_3": slope_nu >= 3.0,
        "slope_radiation_ge_2": slope_rad >= 2.0,
        "min_separation": all(
            abs(r.min_separation - r.turning_separation) <= 0.15 * r.turning_separation for r in reps),
    }
    return {"slope_nu": slope_nu, "slope_radiation": slope_rad, "checks": checks,
            "runs": [r.to_dict() for r in reps]}


# ---------------------------------------------------------------- orbital stability


def random_odd_perturbation(grid, norm, rng, support=(1.0, 20.0), n_bumps=6):
    """Smooth odd (phi, pi) pair on a half-line grid with whole-line energy norm = norm."""
    x = grid.x
    parts = []
    for _ in range(2):
        f = np.zeros_like(x)
        for _ in range(n_bumps):
            c = rng.uniform(*support)
            s = rng.uniform(0.5, 3.0)
            a = rng.normal()
            f += a * (np.exp(-0.5 * ((x - c) / s) ** 2) - np.exp(-0.5 * ((x + c) / s) ** 2))
        parts.append(f)
    pert = FieldPair(0.0, parts[0], parts[1], grid)
    scale = norm / analysis.energy_norm(odd_extension(pert)) if norm > 0 else 0.0
    return pert.scaled(scale)


@dataclass
class OrbitalReport:
    v0: float
    y0: float
    psi_norm: float
    t_final: float
    sup_deviation: float = float("nan")
    sup_psi: float = float("nan")
    sup_speed_term: float = float("nan")
    bound_scale: float = float("nan")
    constant: float = float("nan")
    y_start: float = float("nan")
    y_min_increment: float = float("nan")
    y_monotone: bool = False
    energy_drift: float = float("nan")
    runtime: float = 0.0
    error: str = ""
    series: dict = field(default_factory=dict, repr=False)


def orbital_run(v0=0.1, y0=None, psi_norm=None, seed=0, dx=0.02, dt=0.005, length=150.0,
                t_final=None, record_dt=0.5, series_path=None):
    t0 = time.perf_counter()
    y0 = 4.0 * math.log(1.0 / v0) if y0 is None else y0
    psi_norm = v0 ** 4.125 if psi_norm is None else psi_norm
    t_final = 5.0 / v0 if t_final is None else t_final
    rep = OrbitalReport(v0, y0, psi_norm, t_final)
    grid = Grid.from_bounds(0.0, length, dx)
    rng = np.random.default_rng(seed)
    state = kink_pair_state(v0, y0, grid) + random_odd_perturbation(grid, psi_norm, rng, (1.0, y0 + 10.0))
    tracker = VelocityTracker(v0, y0)
    energies = []

    def on_record(s):
        energies.append(diagnostics.energy(odd_extension(s), warn=False))
        tracker.add(s)

    try:
        evolve(state, EvolveConfig(dt, "odd-half-line", max(1, int(round(record_dt / dt)))), t_final, on_record)
    except (WindowError, DivergenceError) as exc:
        rep.error = str(exc)
        rep.runtime = time.perf_counter() - t0
        return rep
    s = tracker.finish()
    speed_term = v0 * np.abs(s.v_hat - v0)
    dev = speed_term + s.kappa_norm
    rep.sup_deviation = float(dev.max())
    rep.sup_psi = float(s.kappa_norm.max())
    rep.sup_speed_term = float(speed_term.max())
    rep.bound_scale = psi_norm ** 0.5 + (1.0 + y0) ** 0.5 * math.exp(-SQRT2 * y0)
    rep.constant = rep.sup_deviation / rep.bound_scale
    rep.y_start = float(s.y_hat[0])
    rep.y_min_increment = float(np.min(s.y_hat - s.y_hat[0]))
    rep.y_monotone = bool(rep.y_min_increment >= -1e-9)
    e = np.array(energies)
    rep.energy_drift = float(np.max(np.abs(e - e[0])) / e[0])
    rep.series = {"t": s.t.tolist(), "v_hat": s.v_hat.tolist(), "y_hat": s.y_hat.tolist(),
                  "kappa_norm": s.kappa_norm.tolist()}
    if series_path is not None:
        s.write_csv(series_path)
    rep.runtime = time.perf_counter() - t0
    return rep


def orbital_checks(rep, c_max=100.0):
    return {"constant_le_cmax": rep.constant <= c_max, "y_monotone": rep.y_monotone,
            "fit_ok": not rep.error}


# ---------------------------------------------------------------- ansatz residual table


def residual_table(v_list, dx=0.02, margin=30.0):
    """Rows (v, t, res_bare, res_corrected) at t in {0, 1/v, 2/v}."""
    rows = []
    for v in v_list:
        for t in (0.0, 1.0 / v, 2.0 / v):
            half = 0.5 * separation(v, t)
            grid = Grid.symmetric(math.ceil(half + margin), dx)
            bare = residual_norm(AnsatzParams(v, with_correction=False), t, grid)
            corr = residual_norm(AnsatzParams(v), t, grid)
            rows.append((v, t, bare, corr))
    return rows


def residual_summary(rows):
    at0 = [(v, b, c) for v, t, b, c in rows if t == 0.0]
    return {
        "slope_bare_t0": loglog_slope([r[0] for r in at0], [r[1] for r in at0]),
        "slope_corrected_t0": loglog_slope([r[0] for r in at0], [r[2] for r in at0]),
        "corrected_below_bare": all(c < b for _, _, b, c in rows),
    }


# ---------------------------------------------------------------- verification suite


def ode_checks(v=0.1, n_samples=100, span=20.0):
    """Residuals of the fundamental solutions, the Wronskian and a forced solve."""
    ts = np.linspace(-span / v, span / v, n_samples)
    h = 1e-3
    worst = 0.0
    for t in ts:
        f = lambda s: mod_ode.fundamental_solutions(v, s)
        deriv = (f(t - 2 * h) - 8 * f(t - h) + 8 * f(t + h) - f(t + 2 * h)) / (12 * h)
        worst = max(worst, float(np.abs(deriv - f(t) @ mod_ode.system_matrix(v, t).T).max()))
    wr = max(abs(mod_ode.wronskian(v, t) + SQRT2 * v) for t in ts)
    y0 = [0.3, -0.2, 0.1, 0.05]
    force = lambda s: [0.0, 0.0, 1e-3 * math.cos(0.05 * s), 1e-3 * exp_minus_sqrt2_d(v, s)]
    te = np.linspace(-span / v, span / v, 41)
    a = mod_ode.solve_forced(v, force, te[0], y0, te[-1], te)
    b = mod_ode.solve_rk(v, force, te[0], y0, te[-1], te)
    forced = float(np.abs(a.y - b.y).max())
    return {"fundamental_residual": worst, "wronskian_error": wr, "forced_vs_rk": forced}


def spectral_checks(dx=0.01, z_list=(6.0, 9.0, 12.0), trials=200, seed=0):
    out = {}
    g = Grid.from_bounds(-25.0, 25.0, dx)
    single = spectral_lab.OperatorSpec("single-kink", g)
    band = spectral_lab.assemble(single)
    res = spectral_lab.lowest_spectrum(band, g, 3)
    hd = kink_eval(1, g.x)
    out["single_lambda1"] = float(res.eigenvalues[0])
    out["single_lambda2"] = float(res.eigenvalues[1])
    out["single_correlation"] = spectral_lab.correlation(res.eigenvectors[:, 0], hd)
    out["single_annihilation"] = float(np.linalg.norm(spectral_lab.band_matvec(band, hd)[2:-2]) / np.linalg.norm(hd))
    out["max_residual"] = float(res.residuals.max())
    for z in z_list:
        gp = Grid.from_bounds(-25.0, z + 25.0, dx)
        spec = spectral_lab.OperatorSpec("kink-pair", gp, z=z)
        r = spectral_lab.lowest_spectrum(spectral_lab.assemble(spec), gp, 4)
        out[f"pair_z{z:g}_eigenvalues"] = r.eigenvalues.tolist()
        out[f"pair_z{z:g}_n_below"] = int(np.sum(r.eigenvalues < 1e-2))
        out[f"pair_z{z:g}_coercivity"] = spectral_lab.coercivity_check(spec, trials, seed)
        out["max_residual"] = max(out["max_residual"], float(r.residuals.max()))
    gb = Grid.symmetric(40.0, dx)
    out["boosted_coercivity"] = spectral_lab.coercivity_check(
        spectral_lab.OperatorSpec("boosted-pair", gb, v=0.1, t=0.0), trials, seed)
    return out


VERIFY_TOLS = {
    "kink_mass": 1e-8,
    "g_cubic_shift": 1e-6,
    "h_moment": 1e-6,
    "cubic_zero": 1e-8,
    "g_orthogonal": 1e-9,
    "bogomolny": 1e-12,
    "vacua": 1e-15,
    "g_ode": 1e-6,
    "g_k1_independence": 1e-10,
    "separation_law": 1e-12,
    "fundamental_residual": 1e-7,
    "wronskian": 1e-10,
    "forced_vs_rk": 1e-8,
    "single_lambda1": 5e-4,
    "single_correlation": 1e-4,
    "annihilation": 1e-6,
}


def g_ode_residual(dx=0.005, half_width=20.0, k1=None):
    """max |-G'' + U''(H) G - rhs| on interior points, 4th order stencil."""
    grid = Grid.symmetric(half_width, dx)
    x = grid.x
    g = g_correction(x, k1)
    h = kink_eval(0, x)
    rhs = (-24.0 * h ** 2 + 30.0 * h ** 4) * np.exp(-SQRT2 * x) + 8.0 * SQRT2 * kink_eval(1, x)
    lhs = -analysis.d2(g, dx) + ddU(h) * g
    return np.abs(lhs - rhs)[2:-2]


def k1_coefficient_residual(half_width=20.0, dx=0.005):
    """max |-B'' + U''(H) B| with B = H'/sqrt2, without finite differences.

    k1 enters G only through k1 * B, so this is the exact k1 dependence of
    the ODE residual. The third derivative comes from differentiating
    H' = f(H), f(h) = sqrt2 h (1 - h^2), twice: f''(H) H'^2 + f'(H) H''.
    """
    x = Grid.symmetric(half_width, dx).x
    h, hd, hdd = kink_eval(0, x), kink_eval(1, x), kink_eval(2, x)
    h3 = -6.0 * SQRT2 * h * hd ** 2 + SQRT2 * (1.0 - 3.0 * h ** 2) * hdd
    return float(np.max(np.abs(-h3 + ddU(h) * hd)) / SQRT2)


def k1_stencil_difference(dx=0.005, k1_other=0.0):
    """Change of the stencil residual when k1 is replaced; pure truncation error on B."""
    return float(np.max(np.abs(g_ode_residual(dx, k1=k1_other) - g_ode_residual(dx))))


def separation_law_error(v_list=(0.05, 0.1, 0.2), n=41):
    worst = 0.0
    for v in v_list:
        for t in np.linspace(-5.0 / v, 5.0 / v, n):
            d = separation(v, t)
            lhs = separation(v, t, 2)
            worst = max(worst, abs(lhs - 16.0 * SQRT2 * math.exp(-SQRT2 * d)) / (16.0 * SQRT2 * exp_minus_sqrt2_d(v, t)))
            a = SQRT2 * v * t
            closed = (v * v / 8.0) / math.cosh(a) ** 2
            worst = max(worst, abs(exp_minus_sqrt2_d(v, t) - closed) / closed)
    return worst


def verify_suite(tols=None, dx_spectral=0.01, trials=200, seed=0, grid=None):
    """Every closed-form, spectral and ODE check; returns an IdentityReport."""
    t = dict(VERIFY_TOLS)
    if tols:
        unknown = set(tols) - set(t)
        if unknown:
            raise KeyError(f"unknown tolerance names: {sorted(unknown)}")
        t.update(tols)
    grid = Grid.symmetric(40.0, 0.005) if grid is None else grid
    rep = analysis.identity_suite(grid, tols={k: t[k] for k in analysis.IDENTITY_TOLS})
    x = grid.x
    h = kink_eval(0, x)
    rep.add("bogomolny", float(np.max(np.abs(kink_eval(1, x) - np.sqrt(2.0 * U(h))))), 0.0, t["bogomolny"])
    vac = max(abs(float(U(c))) + abs(float(dU(c))) for c in (-1.0, 0.0, 1.0))
    rep.add("vacua", vac, 0.0, t["vacua"])
    rep.add("ddU_vacuum_0", float(ddU(0.0)), 2.0, t["vacua"])
    rep.add("ddU_vacuum_1", float(ddU(1.0)), 8.0, t["vacua"])
    r = g_ode_residual()
    rep.add("g_ode", float(r.max()), 0.0, t["g_ode"])
    rep.add("g_k1_independence", k1_coefficient_residual(), 0.0, t["g_k1_independence"])
    rep.add("separation_law", separation_law_error(), 0.0, t["separation_law"])
    ode = ode_checks()
    rep.add("fundamental_residual", ode["fundamental_residual"], 0.0, t["fundamental_residual"])
    rep.add("wronskian", ode["wronskian_error"], 0.0, t["wronskian"])
    rep.add("forced_vs_rk", ode["forced_vs_rk"], 0.0, t["forced_vs_rk"])
    sp = spectral_checks(dx_spectral, trials=trials, seed=seed)
    rep.add("single_lambda1", sp["single_lambda1"], 0.0, t["single_lambda1"])
    rep.add("single_correlation", sp["single_correlation"], 1.0, t["single_correlation"])
    rep.add("annihilation", sp["single_annihilation"], 0.0, t["annihilation"])
    rep.add("pair_z12_two_modes", float(sp["pair_z12_n_below"]), 2.0, 0.5)
    rep.add("pair_z12_lowest", min(sp["pair_z12_eigenvalues"]), -1e-3, kind="above")
    for z in (6, 9, 12):
        rep.add(f"coercivity_z{z}", sp[f"pair_z{z}_coercivity"], 0.0, kind="above")
    rep.add("coercivity_boosted", sp["boosted_coercivity"], 0.0, kind="above")
    return rep, sp
