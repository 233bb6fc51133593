"""Linear 4x4 system for the translation-mode amplitudes.

State (e1, e2, xi1', xi2') with e1 = y1 - y2, e2 = y1 + y2, driven by
    y' = M(t) y + f(t),   M(t)[2,0] = -32 e^{-sqrt2 d_v(t)},
where e^{-sqrt2 d} = (v^2/8) sech^2(sqrt2 v t). Four explicit solutions of
the homogeneous problem give the fundamental matrix (det = -sqrt2 v), and
forced problems are solved by variation of parameters.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .field_core import SQRT2, exp_minus_sqrt2_d, _check_speed, _sech2


def system_matrix(v, t):
    _check_speed(v)
    m = np.zeros((4, 4))
    m[0, 2] = 1.0
    m[1, 3] = 1.0
    m[2, 0] = -32.0 * exp_minus_sqrt2_d(v, t)
    return m


def fundamental_solutions(v, t):
    """Rows are L1..L4 at time t."""
    _check_speed(v)
    a = SQRT2 * v * t
    th = np.tanh(a)
    s2 = _sech2(a)
    return np.array([
        [th, 0.0, SQRT2 * v * s2, 0.0],
        [a * th - 1.0, 0.0, 2.0 * v * v * t * s2 + SQRT2 * v * th, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, t, 0.0, 1.0],
    ])


def fundamental_matrix(v, t):
    """Columns are L1..L4."""
    return fundamental_solutions(v, t).T


def wronskian(v, t):
    return float(np.linalg.det(fundamental_matrix(v, t)))


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), 4)
    a: np.ndarray  # variation-of-parameters coefficients at each t

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "e1", "e2", "xi1_dot", "xi2_dot"])
            for ti, yi in zip(self.t, self.y):
                w.writerow([repr(float(ti))] + [repr(float(c)) for c in yi])


def _coeff_rate(v, forcing):
    def rate(s):
        fm = fundamental_matrix(v, s)
        return np.linalg.solve(fm, np.asarray(forcing(s), dtype=float))
    return rate


def solve_forced(v, forcing, t0, y0, t1, t_eval=None, tol=1e-12):
    """Variation of parameters: y(t) = Phi(t) [Phi(t0)^{-1} y0 + int_t0^t Phi^{-1} f].

    The coefficient integral is accumulated interval by interval with an
    adaptive vector quadrature. forcing=None means the homogeneous problem.
    """
    _check_speed(v)
    if t_eval is None:
        t_eval = np.linspace(t0, t1, 201)
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval[0] != t0:
        t_eval = np.concatenate(([t0], t_eval))
    fm0 = fundamental_matrix(v, t0)
    if abs(np.linalg.det(fm0)) < 1e-300:
        raise ArithmeticError("singular fundamental matrix")
    a = np.linalg.solve(fm0, np.asarray(y0, dtype=float))
    coeffs = [a.copy()]
    if forcing is not None:
        rate = _coeff_rate(v, forcing)
    for ta, tb in zip(t_eval[:-1], t_eval[1:]):
        if forcing is not None and tb != ta:
            inc, _ = integrate.quad_vec(rate, ta, tb, epsabs=tol, epsrel=tol)
            a = a + inc
        coeffs.append(a.copy())
    coeffs = np.array(coeffs)
    ys = np.array([fundamental_matrix(v, ti) @ ci for ti, ci in zip(t_eval, coeffs)])
    return Trajectory(t_eval, ys, coeffs)


def solve_rk(v, forcing, t0, y0, t1, t_eval=None, rtol=1e-12, atol=1e-14):
    """Reference solution of the same problem by an adaptive Runge-Kutta method."""
    if t_eval is None:
        t_eval = np.linspace(t0, t1, 201)

    def rhs(t, y):
        out = system_matrix(v, t) @ y
        if forcing is not None:
            out = out + np.asarray(forcing(t), dtype=float)
        return out

    sol = integrate.solve_ivp(rhs, (t0, t1), np.asarray(y0, dtype=float), method="DOP853",
                              t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    return Trajectory(sol.t, sol.y.T, np.empty((0, 4)))


def coefficient_envelope(v, forcing, t0, y0, t_eval):
    """Bound ||y(t)|| <= sum_i (|a_i(t0)| + int |(Phi^{-1} f)_i|) ||L_i(t)||."""
    a0 = np.abs(np.linalg.solve(fundamental_matrix(v, t0), np.asarray(y0, dtype=float)))
    rate = _coeff_rate(v, forcing)
    acc = a0.copy()
    out = []
    t_prev = t0
    for t in t_eval:
        if t != t_prev:
            inc, _ = integrate.quad_vec(lambda s: np.abs(rate(s)), t_prev, t, epsabs=1e-12, epsrel=1e-10)
            acc = acc + inc
        t_prev = t
        norms = np.linalg.norm(fundamental_solutions(v, t), axis=1)
        out.append(float(np.dot(acc, norms)))
    return np.array(out)
