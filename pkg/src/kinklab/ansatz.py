"""Approximate two-kink solution and its field-equation residual.

phi(t,x) = F(w(t,x)) - F(w(t,-x)),   F = H + e^{-sqrt2 d} G,
w(t,x) = (x - d(t)/2) / sqrt(1 - d'(t)^2/4).

The second term is H_{-1,0}((x + d/2)/gt) rewritten through
H_{-1,0}(s) = -H(-s). Higher corrections (the r_j, c_k families) are zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analysis
from .field_core import (
    SQRT2,
    DomainError,
    FieldPair,
    dU,
    exp_minus_sqrt2_d,
    g_correction,
    kink_eval,
    resolve_k1,
    separation,
    _g_parts,
    _h_and_complement,
)


@dataclass(frozen=True)
class AnsatzParams:
    v: float
    with_correction: bool = True
    t_shift: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.v < 1.0):
            raise DomainError(f"speed must lie in (0, 1), got {self.v}")
        if not np.isfinite(self.t_shift):
            raise DomainError("t_shift must be finite")


def contraction(v, t):
    """gt(t) = sqrt(1 - d'(t)^2 / 4)"""
    dd = separation(v, t, 1)
    return np.sqrt(1.0 - 0.25 * dd * dd)


def frame_w(v, t, x):
    return (np.asarray(x, dtype=float) - 0.5 * separation(v, t)) / contraction(v, t)


def g_prime(x, k1=None):
    """Closed-form derivative of the correction G."""
    if k1 is None:
        k1 = resolve_k1()
    x = np.asarray(x, dtype=float)
    a, b = _g_parts(x)
    comp = _h_and_complement(x)[1]
    da = -SQRT2 * a + 3.0 * SQRT2 * b * comp
    db = kink_eval(2, x) / SQRT2
    return da + 2.0 * SQRT2 * b + (2.0 * SQRT2 * x + k1) * db


def _fields(p, t, x):
    s = t + p.t_shift
    v = p.v
    d = separation(v, s)
    dd = separation(v, s, 1)
    ddd = separation(v, s, 2)
    gt = np.sqrt(1.0 - 0.25 * dd * dd)
    wp = (x - 0.5 * d) / gt
    wm = (-x - 0.5 * d) / gt
    # d/dt of w(t, +-x)
    rate = dd * ddd / (4.0 * gt * gt)
    wp_t = -dd / (2.0 * gt) + wp * rate
    wm_t = -dd / (2.0 * gt) + wm * rate
    phi = kink_eval(0, wp) - kink_eval(0, wm)
    pi = kink_eval(1, wp) * wp_t - kink_eval(1, wm) * wm_t
    if p.with_correction:
        eps = exp_minus_sqrt2_d(v, s)
        eps_t = -SQRT2 * dd * eps
        gp, gm = g_correction(wp), g_correction(wm)
        phi = phi + eps * (gp - gm)
        pi = pi + eps_t * (gp - gm) + eps * (g_prime(wp) * wp_t - g_prime(wm) * wm_t)
    return phi, pi


def _check_room(p, t, grid):
    half = 0.5 * separation(p.v, t + p.t_shift)
    if grid.x1 < half + 10.0:
        raise DomainError(f"right kink at {half:.2f} is too close to the grid end {grid.x1:.2f}")
    if grid.x0 != 0.0 and grid.x0 > -half - 10.0:
        raise DomainError(f"left kink at {-half:.2f} is too close to the grid start {grid.x0:.2f}")


def ansatz_state(p, t, grid):
    _check_room(p, t, grid)
    phi, pi = _fields(p, t, grid.x)
    return FieldPair(t, phi, pi, grid)


def ansatz_phi(p, t, x):
    return _fields(p, t, np.asarray(x, dtype=float))[0]


def residual_of(phi_of_t, t, grid, h):
    """d_t^2 phi - d_x^2 phi + U'(phi) on interior points.

    phi_of_t(t) returns samples on grid; time derivative by a 5 point
    stencil with step h, space derivative by the 4th order stencil.
    """
    f = [phi_of_t(t + k * h) for k in (-2, -1, 0, 1, 2)]
    ftt = (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h)
    fxx = analysis.d2(f[2], grid.dx)
    lam = ftt - fxx + dU(f[2])
    return lam[2:-2]


def residual_lambda(p, t, grid):
    _check_room(p, t, grid)
    return residual_of(lambda s: ansatz_phi(p, s, grid.x), t, grid, 1e-3 / p.v)


def residual_norm(p, t, grid):
    lam = residual_lambda(p, t, grid)
    w = analysis.quad_weights(lam.size, grid.dx)
    return float(np.sqrt(np.dot(w, lam * lam)))


def free_pair_centre(v, t):
    """Centre of the right kink of the free pair the ansatz tends to as |t| grows.

    d(t)/2 = ln(8/v^2)/(2 sqrt2) + ln cosh(sqrt2 v t)/sqrt2 -> ln(2/v^2)/(2 sqrt2) + v|t|.
    """
    return np.log(2.0 / v ** 2) / (2.0 * SQRT2) + v * np.abs(t)
