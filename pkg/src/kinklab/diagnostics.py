"""Energy, momentum and the half-line quantities used for odd solutions.

E_+ = int_0^inf (phi_x^2 + pi^2)/2 + U(phi),   P_+ = -1/2 int_0^inf pi phi_x.

For odd data pi(t,0) = 0 and U(phi(t,0)) = 0, so the boundary terms give
dE_+/dt = 0 and dP_+/dt = phi_x(t,0)^2 / 4 >= 0. The lyapunov combination
M = E_+ - v0 P_+ (not to be confused with the 2x2 gram matrix of the
modulation module) is therefore non-increasing.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, asdict

import numpy as np

from . import analysis
from .field_core import U, HDOT_NORM2, lorentz_gamma

VACUUM_TOL = 1e-6


@dataclass
class DiagnosticsRecord:
    t: float
    E: float
    P: float
    E_plus: float
    P_plus: float
    phi0: float
    dphi0: float
    M_lyap: float
    boundary_flag: bool = False


def _edge_flag(state):
    ends = (state.phi[0], state.phi[-1])
    return any(min(abs(e - c) for c in (-1.0, 0.0, 1.0)) > VACUUM_TOL for e in ends)


def energy(state, warn=True):
    g = state.grid
    if warn and _edge_flag(state):
        warnings.warn("field not at a vacuum at the grid edge; energy of truncated state", RuntimeWarning)
    phx = analysis.d1(state.phi, g.dx)
    return analysis.integrate(0.5 * state.pi ** 2 + 0.5 * phx ** 2 + U(state.phi), g)


def momentum(state):
    g = state.grid
    phx = analysis.d1(state.phi, g.dx)
    return analysis.integrate(state.pi * phx, g)


def half_line_quantities(state):
    """(E_plus, P_plus, phi_at_0, dphi_at_0) for a state on a grid containing 0.

    E_+ has an even integrand for odd states, so a half weight at x = 0 is
    the natural rule (and makes E = 2 E_+ exact on symmetric grids). The
    P_+ integrand is odd in that case, so it gets the 4th order end rule.
    """
    g = state.grid
    i0 = g.index_of_zero()
    phx = analysis.d1(state.phi, g.dx)
    if i0 == 0:
        # half-line grid: centred stencils through the odd extension
        f = state.phi
        phx[0] = (16.0 * f[1] - 2.0 * f[2]) / (12.0 * g.dx)
        phx[1] = (-f[1] - 8.0 * f[0] + 8.0 * f[2] - f[3]) / (12.0 * g.dx)
    m = g.n - i0
    e_dens = (0.5 * state.pi ** 2 + 0.5 * phx ** 2 + U(state.phi))[i0:]
    p_dens = (state.pi * phx)[i0:]
    w_e = analysis.quad_weights(m, g.dx)
    w_e[:4] = g.dx
    w_e[0] = 0.5 * g.dx
    w_p = analysis.quad_weights(m, g.dx)
    e_plus = float(np.dot(w_e, e_dens))
    p_plus = -0.5 * float(np.dot(w_p, p_dens))
    return e_plus, p_plus, float(state.phi[i0]), float(phx[i0])


def lyapunov_M(state, v0):
    e_plus, p_plus, _, _ = half_line_quantities(state)
    return e_plus - v0 * p_plus


def record(state, v0=0.0):
    e_plus, p_plus, phi0, dphi0 = half_line_quantities(state)
    if state.grid.x0 == 0.0:
        # half-line storage of an odd state: full-line values by symmetry
        E, P = 2.0 * e_plus, 0.0
    else:
        E, P = energy(state, warn=False), momentum(state)
    return DiagnosticsRecord(state.t, E, P, e_plus, p_plus, phi0, dphi0,
                             e_plus - v0 * p_plus, _edge_flag(state))


def flux_check(records):
    """Compare centred differences of P_+ with phi_x(t,0)^2/4.

    records: DiagnosticsRecord list at uniform spacing.
    Returns (max abs deviation, min increment of P_+).
    """
    t = np.array([r.t for r in records])
    p = np.array([r.P_plus for r in records])
    dphi0 = np.array([r.dphi0 for r in records])
    if len(t) < 3:
        raise ValueError("need at least three records")
    dt = np.diff(t)
    if np.ptp(dt) > 1e-9 * dt.mean():
        raise ValueError("records must be uniformly spaced")
    rate = (p[2:] - p[:-2]) / (t[2:] - t[:-2])
    dev = np.abs(rate - 0.25 * dphi0[1:-1] ** 2)
    return float(dev.max()), float(np.diff(p).min())


def boosted_kink_energy(v):
    """E of a single boosted kink, ||H'||^2 / sqrt(1 - v^2)."""
    return HDOT_NORM2 / lorentz_gamma(v)


def pair_lyapunov_leading(v0):
    """Leading term of M for the exact pair at speed v0 (one kink's worth)."""
    g = lorentz_gamma(v0)
    return (0.5 / g + 0.5 * g) * HDOT_NORM2


def write_records_csv(path, records):
    fields = ["t", "E", "P", "E_plus", "P_plus", "phi0", "M_lyap", "dphi0"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for r in records:
            d = asdict(r)
            w.writerow([repr(float(d[k])) for k in fields])
