"""Grid quadrature, finite differences, norms and the scalar identity suite."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as _integrate

from .field_core import (
    SQRT2,
    HDOT_NORM2,
    DomainError,
    Grid,
    d3U,
    g_correction,
    kink_eval,
)

# end weights of the 4th order extended Simpson rule
_END_W = np.array([17.0, 59.0, 43.0, 49.0]) / 48.0


def quad_weights(n, dx):
    w = np.ones(n)
    w[:4] = _END_W
    w[-4:] = _END_W[::-1]
    return w * dx


def integrate(samples, grid):
    """Composite 4th order quadrature of samples over the grid."""
    f = np.asarray(samples, dtype=float)
    if f.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} samples, got {f.shape}")
    return float(np.dot(quad_weights(grid.n, grid.dx), f))


def d1(f, dx):
    """4th order first derivative; one-sided 4th order closure at both ends."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * dx)
    out[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12.0 * dx)
    out[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12.0 * dx)
    out[-1] = -(-25 * f[-1] + 48 * f[-2] - 36 * f[-3] + 16 * f[-4] - 3 * f[-5]) / (12.0 * dx)
    out[-2] = -(-3 * f[-1] - 10 * f[-2] + 18 * f[-3] - 6 * f[-4] + f[-5]) / (12.0 * dx)
    return out


def d2(f, dx):
    """4th order second derivative, same closure idea as d1."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[2:-2] = (-f[:-4] + 16.0 * f[1:-3] - 30.0 * f[2:-2] + 16.0 * f[3:-1] - f[4:]) / (12.0 * dx * dx)
    h2 = 12.0 * dx * dx
    out[0] = (45 * f[0] - 154 * f[1] + 214 * f[2] - 156 * f[3] + 61 * f[4] - 10 * f[5]) / h2
    out[1] = (10 * f[0] - 15 * f[1] - 4 * f[2] + 14 * f[3] - 6 * f[4] + f[5]) / h2
    out[-1] = (45 * f[-1] - 154 * f[-2] + 214 * f[-3] - 156 * f[-4] + 61 * f[-5] - 10 * f[-6]) / h2
    out[-2] = (10 * f[-1] - 15 * f[-2] - 4 * f[-3] + 14 * f[-4] - 6 * f[-5] + f[-6]) / h2
    return out


def pair_inner(a, b):
    """<(a1,a2),(b1,b2)> = int a1 b1 + a2 b2."""
    if a.grid != b.grid:
        raise ValueError("pairing of states on different grids")
    return integrate(a.phi * b.phi + a.pi * b.pi, a.grid)


def sobolev_norms(a):
    """(||phi||_L2, ||phi||_H1, ||pi||_L2, ||(phi,pi)||_{H1xL2})"""
    g = a.grid
    l2 = integrate(a.phi ** 2, g)
    dphi = d1(a.phi, g.dx)
    h1 = l2 + integrate(dphi ** 2, g)
    p2 = integrate(a.pi ** 2, g)
    return np.sqrt(l2), np.sqrt(h1), np.sqrt(p2), np.sqrt(h1 + p2)


def energy_norm(a):
    return sobolev_norms(a)[3]


# ---------------------------------------------------------------- identities


@dataclass
class IdentityEntry:
    name: str
    value: float
    reference: float
    tol: float
    kind: str = "equal"  # "equal": |value - reference| < tol; "above": value > reference

    @property
    def error(self):
        if self.kind == "above":
            return max(0.0, self.reference - self.value)
        return abs(self.value - self.reference)

    @property
    def passed(self):
        if self.kind == "above":
            return bool(self.value > self.reference)
        return bool(self.error < self.tol)


@dataclass
class IdentityReport:
    entries: list = field(default_factory=list)

    def add(self, name, value, reference, tol=0.0, kind="equal"):
        if any(e.name == name for e in self.entries):
            raise ValueError(f"duplicate identity {name}")
        if kind not in ("equal", "above"):
            raise ValueError(f"unknown check kind {kind!r}")
        self.entries.append(IdentityEntry(name, float(value), float(reference), float(tol), kind))

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    @property
    def all_pass(self):
        return all(e.passed for e in self.entries)

    def to_dict(self):
        return {e.name: {"value": e.value, "reference": e.reference,
                         "error": e.error, "pass": e.passed} for e in self.entries}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


IDENTITY_TOLS = {
    "g_cubic_shift": 1e-6,
    "h_moment": 1e-6,
    "cubic_zero": 1e-8,
    "kink_mass": 1e-8,
    "g_orthogonal": 1e-9,
}


def identity_suite(grid=None, tols=None):
    """Grade the five scalar identities on a grid (default [-40,40], dx=0.005).

    g_cubic_shift: int U'''(H) H'^2 G - int U'''(H) H'^2 e^{-sqrt2 x} = 4 sqrt2
    h_moment:      -2 int (6H^5 - 8H^3) e^{-sqrt2 x} = 4 sqrt2
    cubic_zero:    int U'''(H) H'^3 = 0
    kink_mass:     ||H'||^2 = 1/(2 sqrt2)
    g_orthogonal:  <G, H'> = 0
    """
    if grid is None:
        grid = Grid.symmetric(40.0, 0.005)
    t = dict(IDENTITY_TOLS)
    if tols:
        t.update(tols)
    x = grid.x
    h = kink_eval(0, x)
    hd = kink_eval(1, x)
    g = g_correction(x)
    ex = np.exp(-SQRT2 * x)
    u3 = d3U(h)
    rep = IdentityReport()
    four_r2 = 4.0 * SQRT2
    shift = integrate(u3 * hd ** 2 * g, grid) - integrate(u3 * hd ** 2 * ex, grid)
    rep.add("g_cubic_shift", shift, four_r2, t["g_cubic_shift"])
    rep.add("h_moment", -2.0 * integrate((6 * h ** 5 - 8 * h ** 3) * ex, grid), four_r2, t["h_moment"])
    rep.add("cubic_zero", integrate(u3 * hd ** 3, grid), 0.0, t["cubic_zero"])
    rep.add("kink_mass", integrate(hd ** 2, grid), HDOT_NORM2, t["kink_mass"])
    rep.add("g_orthogonal", integrate(g * hd, grid), 0.0, t["g_orthogonal"])
    return rep


# ---------------------------------------------------------------- interaction integrals


def interaction_integral(alpha, beta, m, z):
    """I(z) = int |x|^m e^{-alpha (x)_+} e^{-beta (z-x)_+} dx, split at 0 and z."""
    if alpha <= 0 or beta <= 0:
        raise DomainError("decay rates must be positive")
    z = float(z)
    lo, hi = min(0.0, z), max(0.0, z)

    def f(x):
        return abs(x) ** m * np.exp(-alpha * max(x, 0.0) - beta * max(z - x, 0.0))

    opts = dict(epsabs=0.0, epsrel=1e-11, limit=400)
    total = _integrate.quad(f, -np.inf, lo, **opts)[0]
    if hi > lo:
        total += _integrate.quad(f, lo, hi, **opts)[0]
    total += _integrate.quad(f, hi, np.inf, **opts)[0]
    return total


def interaction_bound(alpha, beta, m, z):
    if alpha == beta:
        return (1.0 + z ** (m + 1)) * np.exp(-alpha * z)
    return max((1.0 + z ** m) * np.exp(-alpha * z), np.exp(-beta * z))


def interaction_ratios(alpha, beta, m, z_values):
    z_values = np.asarray(z_values, dtype=float)
    if alpha <= 0 or beta <= 0:
        raise DomainError("decay rates must be positive")
    if np.any(z_values < 0) or np.any(np.diff(z_values) <= 0):
        raise ValueError("z values must be nonnegative and increasing")
    return np.array([interaction_integral(alpha, beta, m, z) / interaction_bound(alpha, beta, m, z)
                     for z in z_values])


def interaction_bound_probe(alpha, beta, m, z_values):
    """Worst ratio I(z)/bound(z) over the sampled z."""
    return float(np.max(interaction_ratios(alpha, beta, m, z_values)))


def eventually_monotone(r, burn_in=2):
    """True if the tail of r (after burn_in samples) never changes direction."""
    d = np.diff(np.asarray(r)[burn_in:])
    d = d[np.abs(d) > 1e-12 * np.max(np.abs(r))]
    return bool(np.all(d >= 0) or np.all(d <= 0))
