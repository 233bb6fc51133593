"""Closed-form pieces of the phi^6 model.

U(phi) = phi^2 (1 - phi^2)^2 = phi^2 - 2 phi^4 + phi^6, vacua at -1, 0, 1.
The basic kink H(x) = e^{sqrt2 x} / (1 + e^{2 sqrt2 x})^{1/2} climbs from 0 to 1.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np
from scipy import integrate

SQRT2 = np.sqrt(2.0)
HDOT_NORM2 = 1.0 / (2.0 * SQRT2)  # ||H'||^2, the kink mass

# coefficients of U in powers of phi, index = power
_U_COEFFS = np.array([0.0, 0.0, 1.0, 0.0, -2.0, 0.0, 1.0])


class DomainError(ValueError):
    pass


def potential_derivative(order, phi):
    """U^(order)(phi) for order 0..6, from the exact polynomial."""
    if not isinstance(order, (int, np.integer)) or order < 0 or order > 6:
        raise ValueError(f"potential derivative order must be 0..6, got {order!r}")
    poly = np.polynomial.Polynomial(_U_COEFFS).deriv(int(order))
    return poly(np.asarray(phi, dtype=float))


def U(phi):
    phi = np.asarray(phi, dtype=float)
    p2 = phi * phi
    return p2 * (1.0 - p2) ** 2


def dU(phi):
    phi = np.asarray(phi, dtype=float)
    p2 = phi * phi
    return phi * (2.0 - 8.0 * p2 + 6.0 * p2 * p2)


def ddU(phi):
    p2 = np.asarray(phi, dtype=float) ** 2
    return 2.0 - 24.0 * p2 + 30.0 * p2 * p2


def d3U(phi):
    phi = np.asarray(phi, dtype=float)
    return -48.0 * phi + 120.0 * phi ** 3


# ---------------------------------------------------------------- grids / states


@dataclass(frozen=True)
class Grid:
    """Uniform mesh x_i = x0 + i*dx, i = 0..n-1.

    When x0 is an integer multiple of dx the points are generated as exact
    multiples of dx, so a grid containing the origin holds 0.0 exactly and
    symmetric grids are exactly symmetric.
    """

    x0: float
    dx: float
    n: int

    def __post_init__(self):
        if not (self.dx > 0):
            raise ValueError("grid spacing must be positive")
        if self.n < 8:
            raise ValueError("grid needs at least 8 points")

    @classmethod
    def from_bounds(cls, a, b, dx):
        n = int(round((b - a) / dx)) + 1
        return cls(float(a), float(dx), n)

    @classmethod
    def symmetric(cls, half_width, dx):
        m = int(round(half_width / dx))
        return cls(-m * dx, float(dx), 2 * m + 1)

    @functools.cached_property
    def x(self):
        k0 = self.x0 / self.dx
        if abs(k0 - round(k0)) < 1e-9:
            return (np.arange(self.n) + round(k0)) * self.dx
        return self.x0 + np.arange(self.n) * self.dx

    @property
    def x1(self):
        return self.x0 + (self.n - 1) * self.dx

    def index_of_zero(self):
        i = int(round(-self.x0 / self.dx))
        if i < 0 or i >= self.n or self.x[i] != 0.0:
            raise ValueError("grid does not contain x = 0")
        return i

    def is_symmetric(self):
        return self.n % 2 == 1 and self.x[self.n // 2] == 0.0


@dataclass
class FieldPair:
    """A sampled state (phi, pi = d_t phi) at time t."""

    t: float
    phi: np.ndarray
    pi: np.ndarray
    grid: Grid

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.pi = np.asarray(self.pi, dtype=float)
        if self.phi.shape != (self.grid.n,) or self.pi.shape != (self.grid.n,):
            raise ValueError("phi and pi must both have grid.n samples")

    def copy(self):
        return FieldPair(self.t, self.phi.copy(), self.pi.copy(), self.grid)

    def is_finite(self):
        return bool(np.all(np.isfinite(self.phi)) and np.all(np.isfinite(self.pi)))

    def __add__(self, other):
        _same_grid(self, other)
        return FieldPair(self.t, self.phi + other.phi, self.pi + other.pi, self.grid)

    def __sub__(self, other):
        _same_grid(self, other)
        return FieldPair(self.t, self.phi - other.phi, self.pi - other.pi, self.grid)

    def scaled(self, c):
        return FieldPair(self.t, c * self.phi, c * self.pi, self.grid)


def _same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("field pairs live on different grids")


# ---------------------------------------------------------------- kink profiles


def _h_and_complement(x):
    # returns H(x) and 1 - H(x)^2 without overflow or cancellation
    x = np.asarray(x, dtype=float)
    s = np.exp(-SQRT2 * np.abs(x))
    q = 1.0 / (1.0 + s * s)
    pos = x > 0
    h = np.where(pos, np.sqrt(q), s * np.sqrt(q))
    comp = np.where(pos, s * s * q, q)
    return h, comp


def kink_eval(order, x):
    """d^order/dx^order of H_{0,1} at x, order 0..3.

    Uses H' = sqrt2 H (1 - H^2), H'' = U'(H) = 2H(1-H^2)(1-3H^2),
    H''' = U''(H) H'.
    """
    h, comp = _h_and_complement(x)
    if order == 0:
        return h
    hd = SQRT2 * h * comp
    if order == 1:
        return hd
    if order == 2:
        return 2.0 * h * comp * (1.0 - 3.0 * h * h)
    if order == 3:
        return ddU(h) * hd
    raise ValueError(f"kink derivative order must be 0..3, got {order!r}")


class Orientation(enum.Enum):
    rise01 = "rise01"  # H_{0,1}
    rise_10 = "rise-10"  # H_{-1,0}(x) = -H_{0,1}(-x)
    fall10 = "fall10"  # H_{1,0}(x) = H_{0,1}(-x)
    fall0_1 = "fall0-1"  # H_{0,-1}(x) = -H_{0,1}(x)


# (sign of the value, whether x is reflected)
_ORIENT = {
    Orientation.rise01: (1.0, False),
    Orientation.rise_10: (-1.0, True),
    Orientation.fall10: (1.0, True),
    Orientation.fall0_1: (-1.0, False),
}


def profile(orientation, x, order=0):
    """order-th derivative of the oriented static profile."""
    sign, refl = _ORIENT[Orientation(orientation)]
    x = np.asarray(x, dtype=float)
    if refl:
        return sign * (-1.0) ** order * kink_eval(order, -x)
    return sign * kink_eval(order, x)


def lorentz_gamma(v):
    """Contraction factor sqrt(1 - v^2) (called gamma throughout)."""
    v = float(v)
    if not abs(v) < 1.0:
        raise DomainError(f"|v| must be < 1, got {v}")
    return np.sqrt(1.0 - v * v)


@dataclass(frozen=True)
class MovingKink:
    orientation: Orientation
    v: float
    y: float = 0.0

    def __post_init__(self):
        if not abs(self.v) < 1.0:
            raise DomainError(f"|v| must be < 1, got {self.v}")

    @property
    def gamma(self):
        return lorentz_gamma(self.v)

    def fields(self, t, x):
        g = self.gamma
        z = (np.asarray(x, dtype=float) - self.v * t - self.y) / g
        phi = profile(self.orientation, z)
        pi = -(self.v / g) * profile(self.orientation, z, 1)
        return phi, pi


def moving_kink_state(kink, t, grid):
    """phi = P((x - vt - y)/gamma), pi = -(v/gamma) P'(.)"""
    phi, pi = kink.fields(t, grid.x)
    return FieldPair(t, phi, pi, grid)


def kink_pair_fields(v, y, x, t=0.0):
    """Odd pair: H_{0,1} centred at +y moving right plus its mirror image.

    The left member is H_{-1,0} centred at -y with velocity -v, so that
    phi(-x) = -phi(x) and the kinks separate when v > 0.
    """
    right = MovingKink(Orientation.rise01, v, y)
    left = MovingKink(Orientation.rise_10, -v, -y)
    p1, q1 = right.fields(t, x)
    p2, q2 = left.fields(t, x)
    return p1 + p2, q1 + q2


def kink_pair_state(v, y, grid, t=0.0):
    phi, pi = kink_pair_fields(v, y, grid.x, t)
    return FieldPair(t, phi, pi, grid)


# ---------------------------------------------------------------- correction G


def _g_parts(x):
    """(A, B) with G = A + 2 sqrt2 x B + k1 B, B = H'/sqrt2."""
    x = np.asarray(x, dtype=float)
    pos = x > 0
    s_neg = np.exp(SQRT2 * np.minimum(x, 0.0))  # e^{sqrt2 x} for x <= 0
    s_pos = np.exp(-SQRT2 * np.maximum(x, 0.0))  # e^{-sqrt2 x} for x > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        # x <= 0: e^{-sqrt2 x} (1 - (1+u)^{-3/2}), u = e^{2 sqrt2 x}
        a_neg = -np.expm1(-1.5 * np.log1p(s_neg * s_neg)) / s_neg
        a_neg = np.where(s_neg < 1e-150, 1.5 * s_neg, a_neg)
    # x > 0: e^{-sqrt2 x} - e^{-4 sqrt2 x} (1 + e^{-2 sqrt2 x})^{-3/2}
    a_pos = s_pos - s_pos ** 4 * (1.0 + s_pos * s_pos) ** -1.5
    a = np.where(pos, a_pos, a_neg)
    b = kink_eval(1, x) / SQRT2
    return a, b


@functools.lru_cache(maxsize=None)
def resolve_k1():
    """k1 making <G, H'> = 0.

    The k1 term is B = H'/sqrt2, so k1 = -<G0, H'> / <B, H'>.
    """

    def g0_hd(x):
        a, b = _g_parts(x)
        return float((a + 2.0 * SQRT2 * x * b) * kink_eval(1, x))

    num = sum(integrate.quad(g0_hd, lo, hi, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
              for lo, hi in ((-60.0, -5.0), (-5.0, 0.0), (0.0, 5.0), (5.0, 40.0)))
    den = HDOT_NORM2 / SQRT2
    return -num / den


def g_correction(x, k1=None):
    if k1 is None:
        k1 = resolve_k1()
    a, b = _g_parts(x)
    x = np.asarray(x, dtype=float)
    return a + (2.0 * SQRT2 * x + k1) * b


# ---------------------------------------------------------------- separation law


def _check_speed(v):
    if not (0.0 < v < 1.0):
        raise DomainError(f"speed must lie in (0, 1), got {v}")


def _log_cosh(a):
    a = np.abs(a)
    return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)


def _sech2(a):
    e = np.exp(-2.0 * np.abs(a))
    return 4.0 * e / (1.0 + e) ** 2


def separation(v, t, order=0):
    """d_v(t) = (1/sqrt2) ln((8/v^2) cosh^2(sqrt2 v t)) and its first two derivatives."""
    _check_speed(v)
    a = SQRT2 * v * np.asarray(t, dtype=float)
    if order == 0:
        return (np.log(8.0 / v ** 2) + 2.0 * _log_cosh(a)) / SQRT2
    if order == 1:
        return 2.0 * v * np.tanh(a)
    if order == 2:
        return 2.0 * SQRT2 * v * v * _sech2(a)
    raise ValueError("separation order must be 0, 1 or 2")


def exp_minus_sqrt2_d(v, t):
    """e^{-sqrt2 d_v(t)} = (v^2/8) sech^2(sqrt2 v t), evaluated without overflow."""
    _check_speed(v)
    return v * v / 8.0 * _sech2(SQRT2 * v * np.asarray(t, dtype=float))


def odd_extension(state):
    """Mirror a half-line state (grid starting at 0) to the symmetric full line."""
    g = state.grid
    if g.x0 != 0.0:
        return state
    full = Grid(-(g.n - 1) * g.dx, g.dx, 2 * g.n - 1)
    phi = np.concatenate((-state.phi[:0:-1], state.phi))
    pi = np.concatenate((-state.pi[:0:-1], state.pi))
    return FieldPair(state.t, phi, pi, full)
