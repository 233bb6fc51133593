"""Reading kink parameters off a field.

Two fits live here. fit_two_kink solves the two orthogonality conditions
built from the C and D vectors of a moving kink (C = -d/dy, D = +d/dv of
the boosted kink state) by a damped Newton iteration; only the right kink
is fitted, the left one follows from oddness. two_mode_decompose projects
the difference between a state and the approximate solution onto the two
translation modes through the 2x2 gram system.

Also here: the null directions psi^0, psi^1 of the linearised flow around
a moving kink and the exact linear solutions Y^0, Y^1 built from them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .ansatz import ansatz_state, contraction, frame_w
from .field_core import (
    HDOT_NORM2,
    FieldPair,
    Orientation,
    kink_eval,
    kink_pair_fields,
    lorentz_gamma,
    odd_extension,
    profile,
)

Y_FLOOR = 3.0
FIT_WINDOW = 40.0  # inner products are taken on |x - y| < FIT_WINDOW


class FitError(RuntimeError):
    def __init__(self, msg, last=None):
        super().__init__(msg)
        self.last = last


class SeparationError(FitError):
    pass


class WindowError(RuntimeError):
    pass


def J(a):
    """J(a1, a2) = (a2, -a1) on FieldPairs."""
    return FieldPair(a.t, a.pi, -a.phi, a.grid)


def _cd(v, y, x):
    g = lorentz_gamma(v)
    z = (x - y) / g
    hd = kink_eval(1, z)
    hdd = kink_eval(2, z)
    c = (hd / g, -(v / (g * g)) * hdd)
    d = ((v / (g * g)) * z * hd, -hd / g ** 3 - (v * v / g ** 3) * z * hdd)
    return c, d


def cd_vectors(v, y, grid):
    (c1, c2), (d1, d2) = _cd(v, y, grid.x)
    return FieldPair(0.0, c1, c2, grid), FieldPair(0.0, d1, d2, grid)


@dataclass
class ModulationResult:
    v_hat: float
    y_hat: float
    kappa: FieldPair
    ortho_residuals: tuple
    iterations: int
    v0: float
    history: list = field(default_factory=list)


class _Fitter:
    """Evaluates the two conditions on a window around the right kink."""

    def __init__(self, state, v0):
        full = odd_extension(state)
        self.full = full
        self.x = full.grid.x
        self.dx = full.grid.dx
        self.phi = full.phi
        self.pi = full.pi
        self.v0 = v0
        g0 = lorentz_gamma(v0)
        self.a0 = HDOT_NORM2 * (v0 / g0 ** 3 - v0 / g0)

    def window(self, y):
        lo = np.searchsorted(self.x, y - FIT_WINDOW)
        hi = np.searchsorted(self.x, y + FIT_WINDOW)
        return slice(lo, hi)

    def F(self, v, y, sl):
        x = self.x[sl]
        p, q = kink_pair_fields(v, y, x)
        k1 = self.phi[sl] - p
        k2 = self.pi[sl] - q
        (c1, c2), (d1, d2) = _cd(v, y, x)
        w = analysis.quad_weights(x.size, self.dx)
        kc = np.dot(w, k1 * c2 - k2 * c1)  # <kappa, J C>
        kd = np.dot(w, k1 * d2 - k2 * d1)  # <kappa, J D>
        return np.array([(v - self.v0) * self.a0 + v * kc, kd])


def fit_two_kink(state, v0, y0, v_guess=None, tol=1e-13, max_iter=30, y_floor=Y_FLOOR):
    """Damped Newton solve of F(v, y) = 0 starting from (v_guess or v0, y0).

    v0 is the reference speed that enters the first condition.
    """
    if y0 < y_floor:
        raise SeparationError(f"initial centre {y0} below the separation floor {y_floor}")
    fit = _Fitter(state, v0)
    v = v0 if v_guess is None else v_guess
    y = y0
    sl = fit.window(y)
    f = fit.F(v, y, sl)
    hist = [float(np.linalg.norm(f))]
    hv, hy = 1e-6, 1e-5
    it = 0
    converged = hist[0] < tol
    while not converged:
        if it == max_iter:
            raise FitError(f"no convergence in {max_iter} iterations", (v, y))
        it += 1
        jac = np.empty((2, 2))
        jac[:, 0] = (fit.F(v + hv, y, sl) - fit.F(v - hv, y, sl)) / (2 * hv)
        jac[:, 1] = (fit.F(v, y + hy, sl) - fit.F(v, y - hy, sl)) / (2 * hy)
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as exc:
            raise FitError("singular jacobian", (v, y)) from exc
        lam = 1.0
        for _ in range(9):
            vn, yn = v + lam * step[0], y + lam * step[1]
            if abs(vn) < 1.0 and yn >= y_floor:
                fn = fit.F(vn, yn, sl)
                if np.linalg.norm(fn) <= np.linalg.norm(f):
                    break
            lam *= 0.5
        else:
            if np.linalg.norm(f) < 1e3 * tol:
                break  # already at the rounding floor
            if y + step[1] < y_floor:
                raise SeparationError(f"iterate left the region y >= {y_floor}", (v, y))
            raise FitError("line search failed", (v, y))
        v, y, f = vn, yn, fn
        if abs(step[1]) > 1.0:
            sl = fit.window(y)
            f = fit.F(v, y, sl)
        hist.append(float(np.linalg.norm(f)))
        converged = hist[-1] < tol or (abs(lam * step[0]) < 1e-15 and abs(lam * step[1]) < 1e-13)
    if y < y_floor:
        raise SeparationError(f"fitted centre {y} below the separation floor", (v, y))
    g = state.grid
    p, q = kink_pair_fields(v, y, g.x)
    kappa = FieldPair(state.t, state.phi - p, state.pi - q, g)
    f_full = fit.F(v, y, slice(None))
    return ModulationResult(float(v), float(y), kappa, (float(f_full[0]), float(f_full[1])), it, v0, hist)


def kappa_norm(res):
    """Energy norm of the fit residual over the whole line."""
    return analysis.energy_norm(odd_extension(res.kappa))


# ---------------------------------------------------------------- gram decomposition


@dataclass
class TwoModeCoefficients:
    y1: float
    y2: float
    u: FieldPair
    gram: np.ndarray


def two_mode_decompose(state, p, t):
    """Split state - approximate solution into translation modes plus u.

    u = phi - phi_ansatz - (y1/gt) H'(w(t,x)) - (y2/gt) H'(w(t,-x)) with
    <u, H'(w(t,x))> = <u, H'(w(t,-x))> = 0. The pi slot of u carries
    pi - pi_ansatz.
    """
    st = odd_extension(state) if state.grid.x0 == 0.0 else state
    g = st.grid
    ans = ansatz_state(p, t + 0.0, g)
    s = t + p.t_shift
    gt = contraction(p.v, s)
    e1 = kink_eval(1, frame_w(p.v, s, g.x))
    e2 = kink_eval(1, frame_w(p.v, s, -g.x))
    b1, b2 = e1 / gt, e2 / gt
    ip = lambda f, h: analysis.integrate(f * h, g)
    gram = np.array([[ip(b1, e1), ip(b2, e1)], [ip(b1, e2), ip(b2, e2)]])
    if abs(gram[0, 1]) > 0.5 * min(gram[0, 0], gram[1, 1]):
        raise SeparationError("translation modes overlap too much; gram system ill conditioned")
    r = st.phi - ans.phi
    y1, y2 = np.linalg.solve(gram, [ip(r, e1), ip(r, e2)])
    u = FieldPair(st.t, r - y1 * b1 - y2 * b2, st.pi - ans.pi, g)
    return TwoModeCoefficients(float(y1), float(y2), u, gram)


# ---------------------------------------------------------------- null directions


def _psi_left_inner(kind, v, x):
    """Inner vector a with psi^kind_{-1,0}(x, v) = J a."""
    g = lorentz_gamma(v)
    s = np.asarray(x, dtype=float) / g
    hd = profile(Orientation.rise_10, s, 1)
    hdd = profile(Orientation.rise_10, s, 2)
    if kind == 0:
        return hd, (v / g) * hdd
    if kind == 1:
        return v * s * hd, hd / g + (v * v / g) * s * hdd
    raise ValueError("kind must be 0 or 1")


def _orient(o):
    o = Orientation(o)
    if o not in (Orientation.rise_10, Orientation.rise01):
        raise ValueError("null directions are defined for the rise-10 and rise01 kinks")
    return o


def _psi_inner(kind, orientation, v, x):
    if _orient(orientation) is Orientation.rise_10:
        return _psi_left_inner(kind, v, x)
    # mirror image of the left-moving construction at the same speed
    return _psi_left_inner(kind, v, -np.asarray(x, dtype=float))


def psi_vector(kind, orientation, v, grid):
    a1, a2 = _psi_inner(kind, orientation, v, grid.x)
    return J(FieldPair(0.0, a1, a2, grid))


def y_solution(kind, orientation, v, t, grid):
    """Y^0(x,t) = -J psi^0(x -+ vt),  Y^1 = -J psi^1(x -+ vt) + gamma t Y^0.

    The rise01 kink travels right (x - vt), the rise-10 kink left (x + vt).
    -J J = 1, so -J psi is just the inner vector.
    """
    sgn = -1.0 if _orient(orientation) is Orientation.rise01 else 1.0
    xs = grid.x + sgn * v * t
    a1, a2 = _psi_inner(kind, orientation, v, xs)
    if kind == 1:
        b1, b2 = _psi_inner(0, orientation, v, xs)
        g = lorentz_gamma(v)
        a1 = a1 + g * t * b1
        a2 = a2 + g * t * b2
    return FieldPair(t, a1, a2, grid)


def null_background(orientation, v):
    """Moving kink around which Y^j(orientation) solves the linearised flow."""
    from .field_core import MovingKink
    if _orient(orientation) is Orientation.rise01:
        return MovingKink(Orientation.rise01, v, 0.0)
    return MovingKink(Orientation.rise_10, -v, 0.0)


# ---------------------------------------------------------------- series


@dataclass
class VelocitySeries:
    t: np.ndarray
    v_hat: np.ndarray
    y_hat: np.ndarray
    kappa_norm: np.ndarray
    ortho: np.ndarray
    v0: float
    nu_f: float
    drift: float
    results: list = field(default_factory=list, repr=False)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "v_hat", "y_hat", "kappa_norm", "ortho_res_1", "ortho_res_2"])
            for i in range(len(self.t)):
                w.writerow([repr(float(c)) for c in
                            (self.t[i], self.v_hat[i], self.y_hat[i], self.kappa_norm[i],
                             self.ortho[i, 0], self.ortho[i, 1])])


def final_quarter(values):
    n = len(values)
    return values[n - max(1, n // 4):]


class VelocityTracker:
    """Incremental warm-started fits, one snapshot at a time.

    extra(result) may return a float stored alongside each fit (used for
    the windowed radiation norm).
    """

    def __init__(self, v0, y0, v_guess=None, keep=False, extra=None):
        self.v0 = v0
        self._v = v0 if v_guess is None else v_guess
        self._y = y0
        self._t = None
        self.keep = keep
        self.extra_fn = extra
        self.ts, self.vs, self.ys, self.kn, self.orth, self.res, self.extra = [], [], [], [], [], [], []

    def add(self, s):
        y_guess = self._y if self._t is None else self._y + self._v * (s.t - self._t)
        try:
            r = fit_two_kink(s, self.v0, y_guess, v_guess=self._v)
        except FitError as exc:
            raise WindowError(f"fit failed at t = {s.t:.4g}: {exc}") from exc
        self._v, self._y, self._t = r.v_hat, r.y_hat, s.t
        self.ts.append(s.t)
        self.vs.append(r.v_hat)
        self.ys.append(r.y_hat)
        self.kn.append(kappa_norm(r))
        self.orth.append(r.ortho_residuals)
        if self.extra_fn is not None:
            self.extra.append(self.extra_fn(r))
        if self.keep:
            self.res.append(r)
        return r

    def __len__(self):
        return len(self.ts)

    def finish(self):
        """Series sorted by time; nu_f and drift from the final quarter."""
        if not self.ts:
            raise WindowError("empty snapshot window")
        order = np.argsort(self.ts)
        vs = np.array(self.vs)[order]
        tail = final_quarter(vs)
        return VelocitySeries(np.array(self.ts)[order], vs, np.array(self.ys)[order],
                              np.array(self.kn)[order], np.array(self.orth).reshape(-1, 2)[order],
                              self.v0, float(np.median(tail)), float(tail.max() - tail.min()),
                              [self.res[i] for i in order] if self.keep else [])


def velocity_series(snapshots, v0, y0, keep=False, v_guess=None):
    """Fit every snapshot with warm starts.

    nu_f is the median of v_hat over the final quarter of the window and
    drift its spread (max - min) there.
    """
    if not snapshots:
        raise WindowError("empty snapshot window")
    tr = VelocityTracker(v0, y0, v_guess, keep)
    for s in snapshots:
        tr.add(s)
    return tr.finish()
