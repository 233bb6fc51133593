"""Linearised operators -d^2/dx^2 + U''(profile) around kink backgrounds.

Operators are stored in symmetric banded (lower) form: row k of the band
holds A[j+k, j]. Eigenvalues at the low end come from the banded LAPACK
driver (reduction to tridiagonal form and bisection); eigenvectors from
shifted inverse iteration with banded solves. Every solve is cross-checked
with a Sturm count from a banded LDL^T factorisation.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import analysis
from .ansatz import frame_w
from .field_core import (
    DomainError,
    FieldPair,
    Grid,
    Orientation,
    ddU,
    kink_eval,
    lorentz_gamma,
    profile,
)

KINDS = ("single-kink", "kink-pair", "boosted-pair", "single-moving")
Z_FLOOR = 3.0


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class OperatorSpec:
    kind: str
    grid: Grid
    z: float = 0.0
    v: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "kink-pair" and self.z < Z_FLOOR:
            raise DomainError(f"pair separation {self.z} below {Z_FLOOR}")
        if self.kind in ("boosted-pair", "single-moving") and not 0.0 < self.v < 1.0:
            raise DomainError(f"speed must lie in (0, 1), got {self.v}")

    def background(self):
        x = self.grid.x
        if self.kind == "single-kink":
            return kink_eval(0, x)
        if self.kind == "kink-pair":
            return kink_eval(0, x - self.z) + profile(Orientation.rise_10, x)
        if self.kind == "boosted-pair":
            return kink_eval(0, frame_w(self.v, self.t, x)) - kink_eval(0, frame_w(self.v, self.t, -x))
        return kink_eval(0, (x - self.v * self.t) / lorentz_gamma(self.v))

    def translation_modes(self):
        """Directions the coercivity statements are orthogonal to."""
        x = self.grid.x
        if self.kind == "single-kink":
            return [kink_eval(1, x)]
        if self.kind == "kink-pair":
            return [kink_eval(1, x - self.z), profile(Orientation.rise_10, x, 1)]
        if self.kind == "boosted-pair":
            return [kink_eval(1, frame_w(self.v, self.t, x)), kink_eval(1, frame_w(self.v, self.t, -x))]
        return [kink_eval(1, (x - self.v * self.t) / lorentz_gamma(self.v))]


def assemble(spec):
    """4th order -d^2/dx^2 + U''(background), zero Dirichlet data past both ends.

    Returns the (3, n) lower band.
    """
    n = spec.grid.n
    c = 1.0 / (12.0 * spec.grid.dx ** 2)
    band = np.zeros((3, n))
    band[0] = 30.0 * c + ddU(spec.background())
    band[1, :-1] = -16.0 * c
    band[2, :-2] = c
    return band


def band_matvec(band, f):
    out = band[0] * f
    out[:-1] += band[1, :-1] * f[1:]
    out[1:] += band[1, :-1] * f[:-1]
    out[:-2] += band[2, :-2] * f[2:]
    out[2:] += band[2, :-2] * f[:-2]
    return out


def sturm_count(band, sigma):
    """Number of eigenvalues below sigma, from the signs of the LDL^T pivots of A - sigma."""
    a0 = band[0] - sigma
    a1 = band[1]
    a2 = band[2]
    n = a0.size
    tiny = np.finfo(float).tiny
    d_prev2 = d_prev = 1.0
    l1_prev = l2_prev = l2_prev2 = 0.0
    neg = 0
    for i in range(n):
        di = a0[i] - l1_prev * l1_prev * d_prev - l2_prev2 * l2_prev2 * d_prev2
        if di == 0.0:
            di = tiny
        if di < 0.0:
            neg += 1
        l1 = (a1[i] - l2_prev * d_prev * l1_prev) / di if i + 1 < n else 0.0
        l2 = a2[i] / di if i + 2 < n else 0.0
        d_prev2, d_prev = d_prev, di
        l2_prev2, l2_prev = l2_prev, l2
        l1_prev = l1
    return neg


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, dx * sum(psi^2) = 1
    residuals: np.ndarray
    grid: Grid

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "eigenvalue", "residual"])
            for i, (lam, r) in enumerate(zip(self.eigenvalues, self.residuals), start=1):
                w.writerow([i, repr(float(lam)), repr(float(r))])


def _to_solve_band(band, sigma):
    """Full (5, n) band of A - sigma in the layout solve_banded expects."""
    n = band.shape[1]
    ab = np.zeros((5, n))
    ab[2] = band[0] - sigma
    ab[1, 1:] = band[1, :-1]
    ab[0, 2:] = band[2, :-2]
    ab[3, :-1] = band[1, :-1]
    ab[4, :-2] = band[2, :-2]
    return ab


def inverse_iteration(band, lam, previous=(), iters=50, tol=1e-13):
    """Eigenvector for the eigenvalue lam by shifted inverse iteration.

    previous: unit vectors of already found eigenpairs; they are projected
    out each sweep so that clustered eigenvalues give distinct vectors.
    """
    n = band.shape[1]
    shift = lam - max(1e-10, 1e-12 * abs(lam))
    ab = _to_solve_band(band, shift)
    rng = np.random.default_rng(12345)
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    for _ in range(iters):
        for p in previous:
            q -= np.dot(p, q) * p
        z = linalg.solve_banded((2, 2), ab, q, check_finite=False)
        for p in previous:
            z -= np.dot(p, z) * p
        z /= np.linalg.norm(z)
        if np.dot(z, q) < 0:
            z = -z
        done = np.linalg.norm(z - q) < tol
        q = z
        if done:
            break
    return q


def lowest_spectrum(band, grid, m=4, res_tol=1e-8):
    if not 1 <= m <= 10:
        raise ValueError("m must lie in 1..10")
    try:
        lam = linalg.eigvals_banded(band, lower=True, select="i", select_range=(0, m - 1))
    except linalg.LinAlgError as exc:
        raise SolverError(str(exc)) from exc
    vecs = []
    for k in range(m):
        vecs.append(inverse_iteration(band, lam[k], vecs))
    vec = np.array(vecs).T
    # Rayleigh quotients sharpen the eigenvalues to the accuracy of the vectors
    lam = np.array([np.dot(vec[:, k], band_matvec(band, vec[:, k])) for k in range(m)])
    order = np.argsort(lam)
    lam, vec = lam[order], vec[:, order] / np.sqrt(grid.dx)
    res = np.array([np.sqrt(grid.dx) * np.linalg.norm(band_matvec(band, vec[:, k]) - lam[k] * vec[:, k])
                    for k in range(m)])
    if np.any(res > res_tol):
        raise SolverError(f"eigenpairs not certified: residuals {res}")
    # the pivots of A - sigma must agree on how many eigenvalues lie below
    above = lam[-1] + max(1e-9, 1e-6 * abs(lam[-1]))
    below = lam[0] - max(1e-9, 1e-6 * abs(lam[0]))
    if sturm_count(band, above) < m or sturm_count(band, below) != 0:
        raise SolverError("inertia count disagrees with the computed eigenvalues")
    return SpectrumResult(lam, vec, res, grid)


def solve_many(specs, m=4, workers=None):
    """Independent specs in parallel threads (LAPACK releases the GIL)."""
    def one(spec):
        return lowest_spectrum(assemble(spec), spec.grid, m)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(one, specs))


def correlation(f, g):
    return abs(float(np.dot(f, g))) / float(np.linalg.norm(f) * np.linalg.norm(g))


# ---------------------------------------------------------------- coercivity


def h1_norm2(g, grid):
    gx = analysis.d1(g, grid.dx)
    return analysis.integrate(g * g + gx * gx, grid)


def project_out(g, modes, grid):
    """L^2 projection of g onto the orthogonal complement of span(modes)."""
    if not modes:
        return g
    ip = lambda a, b: analysis.integrate(a * b, grid)
    gram = np.array([[ip(a, b) for b in modes] for a in modes])
    rhs = np.array([ip(g, a) for a in modes])
    c = np.linalg.solve(gram, rhs)
    return g - sum(ci * a for ci, a in zip(c, modes))


def random_smooth_field(grid, rng, n_bumps=6, centres=None):
    """Sum of Gaussian bumps with random weights, centres and widths; vanishes at the ends."""
    x = grid.x
    lo, hi = (x[0] + 4.0, x[-1] - 4.0) if centres is None else centres
    g = np.zeros_like(x)
    for _ in range(n_bumps):
        c = rng.uniform(lo, hi)
        s = rng.uniform(0.3, 3.0)
        g += rng.normal() * np.exp(-0.5 * ((x - c) / s) ** 2)
    g[0] = g[-1] = 0.0
    return g


def rayleigh_h1(band, g, grid):
    return analysis.integrate(g * band_matvec(band, g), grid) / h1_norm2(g, grid)


def coercivity_check(spec, trial_count=200, seed=0, project=True):
    """min over random smooth trials of <A g, g> / ||g||_{H^1}^2.

    Trials concentrate near the kink cores (where the translation modes
    live) and half of them start from a mode plus noise.
    """
    rng = np.random.default_rng(seed)
    band = assemble(spec)
    modes = spec.translation_modes()
    x = spec.grid.x
    core = [x[int(np.argmax(np.abs(mode)))] for mode in modes]
    span = (min(core) - 8.0, max(core) + 8.0)
    best = np.inf
    for k in range(trial_count):
        g = random_smooth_field(spec.grid, rng, centres=span)
        if k % 2:
            mode = modes[k // 2 % len(modes)]
            g = mode * (np.max(np.abs(g)) / np.max(np.abs(mode))) * rng.uniform(2, 10) + g
        if project:
            g = project_out(g, modes, spec.grid)
        best = min(best, rayleigh_h1(band, g, spec.grid))
    return float(best)


def coercivity_constant(spec):
    """Exact discrete constant: min of <A g, g>/||g||^2_{H^1} over g orthogonal to the modes.

    Dense generalised eigenproblem on the orthogonal complement; meant for
    coarse grids (a few thousand points).
    """
    g = spec.grid
    n = g.n
    band = assemble(spec)
    a = np.diag(band[0]) + np.diag(band[1, :-1], -1) + np.diag(band[1, :-1], 1)
    a += np.diag(band[2, :-2], -2) + np.diag(band[2, :-2], 2)
    c = 1.0 / (12.0 * g.dx ** 2)
    b = np.eye(n) * (1.0 + 30.0 * c) + (np.eye(n, k=1) + np.eye(n, k=-1)) * (-16.0 * c)
    b += (np.eye(n, k=2) + np.eye(n, k=-2)) * c
    m = np.array(spec.translation_modes()).T
    q, _ = np.linalg.qr(m, mode="complete")
    basis = q[:, m.shape[1]:]
    lam = linalg.eigh(basis.T @ a @ basis, basis.T @ b @ basis, eigvals_only=True,
                      subset_by_index=[0, 0])
    return float(lam[0])


# ---------------------------------------------------------------- moving-frame forms


def smooth_cutoff(y, lo=2.0 * (1.0 - 1e-3), hi=2.0):
    """C-infinity step: 1 for y <= lo, 0 for y >= hi."""
    s = np.clip((np.asarray(y, dtype=float) - lo) / (hi - lo), 0.0, 1.0)

    def f(u):
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(-1.0 / u[pos])
        return out

    a, b = f(1.0 - s), f(s)
    return a / (a + b)


def cutoffs(v, t, x):
    """(chi_1, chi_2) splitting the line between the left and right kinks."""
    if t <= 0:
        raise DomainError("cutoffs are defined for t > 0")
    p = 0.5 * v * (1.0 - 1e-3)
    c1 = smooth_cutoff((np.asarray(x, dtype=float) + v * t) / (p * t))
    return c1, 1.0 - c1


def moving_pair_background(v, t, x):
    g = lorentz_gamma(v)
    return kink_eval(0, (x - v * t) / g) + profile(Orientation.rise_10, (x + v * t) / g)


def q_parts(r, v, t):
    """(quadratic part, cross part) of Q(t, r); r.phi = r, r.pi = dr/dt."""
    grid = r.grid
    x = grid.x
    rx = analysis.d1(r.phi, grid.dx)
    quad = 0.5 * analysis.integrate(r.pi ** 2 + rx ** 2 + ddU(moving_pair_background(v, t, x)) * r.phi ** 2, grid)
    c1, c2 = cutoffs(v, t, x)
    cross = v * analysis.integrate((c2 - c1) * r.pi * rx, grid)
    return quad, cross


def q_functional(r, v, t):
    quad, cross = q_parts(r, v, t)
    return quad + cross


def null_vectors(v, t, grid):
    """psi^0, psi^1 of both kinks at time t, as FieldPairs (travelling frames)."""
    from .modulation import J, _psi_inner
    out = []
    for o, sgn in ((Orientation.rise01, -1.0), (Orientation.rise_10, 1.0)):
        xs = grid.x + sgn * v * t
        for kind in (0, 1):
            a1, a2 = _psi_inner(kind, o, v, xs)
            out.append(J(FieldPair(t, a1, a2, grid)))
    return out


def project_pairs(r, vectors):
    """L^2 x L^2 projection of r off span(vectors)."""
    grid = r.grid
    ip = lambda a, b: analysis.integrate(a.phi * b.phi + a.pi * b.pi, grid)
    gram = np.array([[ip(a, b) for b in vectors] for a in vectors])
    c = np.linalg.solve(gram, np.array([ip(r, a) for a in vectors]))
    phi = r.phi - sum(ci * a.phi for ci, a in zip(c, vectors))
    pi = r.pi - sum(ci * a.pi for ci, a in zip(c, vectors))
    return FieldPair(r.t, phi, pi, grid)


def energy_norm2(r):
    return h1_norm2(r.phi, r.grid) + analysis.integrate(r.pi ** 2, r.grid)


def quadratic_form_L1(u, v, t):
    """int u_t^2 + u_x^2 + U''(H(w(t,x)) - H(w(t,-x))) u^2 over the line."""
    grid = u.grid
    x = grid.x
    bg = kink_eval(0, frame_w(v, t, x)) - kink_eval(0, frame_w(v, t, -x))
    ux = analysis.d1(u.phi, grid.dx)
    return analysis.integrate(u.pi ** 2 + ux ** 2 + ddU(bg) * u.phi ** 2, grid)


def l1_modes(v, t, grid):
    """phi-part directions of the orthogonality conditions on u."""
    return [kink_eval(1, frame_w(v, t, grid.x)), kink_eval(1, frame_w(v, t, -grid.x))]

