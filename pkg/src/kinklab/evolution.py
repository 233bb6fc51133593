"""Kick-drift-kick time stepping for phi_tt = phi_xx - U'(phi).

Space: 4th order Laplacian. Boundary points are held fixed and the stencil
reaches past them through ghost values: the clamped vacuum value on a
vacuum edge, the odd reflection -phi(-x) at x = 0 in half-line mode. Both
closures keep the discrete Laplacian symmetric.

Snapshot record layout (binary stream): float64 t, then n float64 phi
samples, then n float64 pi samples, repeated; little endian, no header.
The CSV variant writes the same numbers one record per row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field_core import FieldPair, ddU, dU, MovingKink

BOUNDARIES = ("fixed-vacuum", "odd-half-line", "zero")
VACUA = (-1.0, 0.0, 1.0)


class DivergenceError(RuntimeError):
    def __init__(self, t):
        super().__init__(f"non-finite field at t = {t:.6g}")
        self.t = t


@dataclass(frozen=True)
class EvolveConfig:
    dt: float
    boundary: str = "fixed-vacuum"
    record_every: int = 0

    def check(self, dx):
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary mode {self.boundary!r}")
        if not (0 < self.dt <= 0.5 * dx * (1 + 1e-12)):
            raise ValueError(f"CFL violated: dt = {self.dt} > 0.5*dx = {0.5 * dx}")
        if self.record_every < 0:
            raise ValueError("record_every must be >= 0")


class _Laplacian:
    def __init__(self, n, dx, boundary):
        self.n = n
        self.c = 1.0 / (12.0 * dx * dx)
        self.boundary = boundary
        self.ext = np.zeros(n + 4)

    def __call__(self, f, out):
        e = self.ext
        n = self.n
        e[2:n + 2] = f
        if self.boundary == "odd-half-line":
            e[1] = -f[1]
            e[0] = -f[2]
        else:
            e[0] = e[1] = f[0]
        e[n + 2] = e[n + 3] = f[-1]
        np.multiply(e[2:n + 2], -30.0, out=out)
        out += 16.0 * (e[1:n + 1] + e[3:n + 3])
        out -= e[0:n] + e[4:n + 4]
        out *= self.c
        return out


def _check_edges(state, boundary):
    phi = state.phi
    if boundary == "odd-half-line":
        if state.grid.x[0] != 0.0:
            raise ValueError("half-line mode needs a grid starting at x = 0")
        if abs(phi[0]) > 1e-6 or abs(phi[-1] - 1.0) > 1e-6:
            raise ValueError("half-line data must vanish at 0 and sit at vacuum 1 on the right")
    elif boundary == "fixed-vacuum":
        for val in (phi[0], phi[-1]):
            if min(abs(val - c) for c in VACUA) > 1e-6:
                raise ValueError(f"edge value {val} is not within 1e-6 of a vacuum")


def _snap(val):
    return min(VACUA, key=lambda c: abs(val - c))


def _n_steps(t0, t_final, dt):
    span = t_final - t0
    if span < 0:
        raise ValueError("t_final must not precede the state time")
    n = max(1, math.ceil(span / dt - 1e-9)) if span > 0 else 0
    return n, (span / n if n else dt)


def evolve(state, cfg, t_final, on_record=None):
    """Advance state to absolute time t_final.

    on_record(FieldPair) is called with copies at the start and every
    cfg.record_every steps (if > 0); the call is synchronous, so a slow
    consumer throttles the stepping instead of losing records.
    """
    g = state.grid
    cfg.check(g.dx)
    _check_edges(state, cfg.boundary)
    n_steps, dt = _n_steps(state.t, t_final, cfg.dt)

    phi = state.phi.copy()
    pi = state.pi.copy()
    if cfg.boundary == "odd-half-line":
        phi[0], phi[-1] = 0.0, 1.0
    elif cfg.boundary == "fixed-vacuum":
        phi[0], phi[-1] = _snap(phi[0]), _snap(phi[-1])
    pi[0] = pi[-1] = 0.0

    lap = _Laplacian(g.n, g.dx, cfg.boundary)
    acc = np.empty(g.n)

    def accel(f):
        out = lap(f, acc)
        out -= dU(f)
        out[0] = out[-1] = 0.0
        return out

    t0 = state.t
    rec = cfg.record_every if on_record is not None else 0
    if rec:
        on_record(FieldPair(t0, phi.copy(), pi.copy(), g))
    a = accel(phi)
    half = 0.5 * dt
    for k in range(1, n_steps + 1):
        pi += half * a
        phi += dt * pi
        a = accel(phi)
        pi += half * a
        if k % 200 == 0 or k == n_steps or (rec and k % rec == 0):
            if not np.isfinite(phi).all() or not np.isfinite(pi).all():
                raise DivergenceError(t0 + k * dt)
        if rec and k % rec == 0:
            on_record(FieldPair(t0 + k * dt, phi.copy(), pi.copy(), g))
    return FieldPair(t0 + n_steps * dt, phi, pi, g)


def evolve_linearized(background, w, cfg, t_final, on_record=None):
    """Linearised flow around a moving kink: w1' = w2, w2' = w1_xx - U''(B(t,x)) w1.

    Zero Dirichlet data at both ends (boundary mode is ignored).
    """
    if not isinstance(background, MovingKink):
        raise TypeError("background must be a MovingKink")
    g = w.grid
    EvolveConfig(cfg.dt, "zero", cfg.record_every).check(g.dx)
    n_steps, dt = _n_steps(w.t, t_final, cfg.dt)
    x = g.x
    u = w.phi.copy()
    p = w.pi.copy()
    u[0] = u[-1] = p[0] = p[-1] = 0.0
    lap = _Laplacian(g.n, g.dx, "zero")
    acc = np.empty(g.n)

    def accel(f, t):
        out = lap(f, acc)
        out -= ddU(background.fields(t, x)[0]) * f
        out[0] = out[-1] = 0.0
        return out

    t0 = w.t
    rec = cfg.record_every if on_record is not None else 0
    if rec:
        on_record(FieldPair(t0, u.copy(), p.copy(), g))
    a = accel(u, t0)
    half = 0.5 * dt
    for k in range(1, n_steps + 1):
        p += half * a
        u += dt * p
        a = accel(u, t0 + k * dt)
        p += half * a
        if rec and k % rec == 0:
            on_record(FieldPair(t0 + k * dt, u.copy(), p.copy(), g))
    if not (np.isfinite(u).all() and np.isfinite(p).all()):
        raise DivergenceError(t0 + n_steps * dt)
    return FieldPair(t0 + n_steps * dt, u, p, g)


# ---------------------------------------------------------------- snapshot streams


class SnapshotWriter:
    """Append FieldPair records to a binary (.bin) or text (.csv) file."""

    def __init__(self, path):
        self.path = str(path)
        self.binary = not self.path.endswith(".csv")
        self._fh = open(self.path, "wb" if self.binary else "w")

    def __call__(self, state):
        rec = np.concatenate(([state.t], state.phi, state.pi)).astype("<f8")
        if self.binary:
            self._fh.write(rec.tobytes())
        else:
            self._fh.write(",".join(repr(float(r)) for r in rec) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_snapshots(path, grid):
    """Inverse of SnapshotWriter; returns a list of FieldPair."""
    n = grid.n
    path = str(path)
    if path.endswith(".csv"):
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    else:
        data = np.fromfile(path, dtype="<f8").reshape(-1, 2 * n + 1)
    return [FieldPair(float(r[0]), r[1:n + 1], r[n + 1:], grid) for r in data]
