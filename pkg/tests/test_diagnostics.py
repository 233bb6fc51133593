import csv
import math

import numpy as np
import pytest
from scipy import integrate as sint

from kinklab import diagnostics
from kinklab.diagnostics import (
    DiagnosticsRecord,
    boosted_kink_energy,
    energy,
    flux_check,
    half_line_quantities,
    lyapunov_M,
    momentum,
    pair_lyapunov_leading,
    record,
    write_records_csv,
)
from kinklab.field_core import (
    HDOT_NORM2,
    FieldPair,
    Grid,
    MovingKink,
    Orientation,
    kink_eval,
    kink_pair_state,
    moving_kink_state,
    lorentz_gamma,
)


def test_vacuum():
    g = Grid.symmetric(10.0, 0.1)
    s = FieldPair(0.0, np.ones(g.n), np.zeros(g.n), g)
    assert energy(s) == 0.0 and momentum(s) == 0.0


def test_static_kink_energy():
    g = Grid.symmetric(40.0, 0.01)
    s = FieldPair(0.0, kink_eval(0, g.x), np.zeros(g.n), g)
    assert energy(s) == pytest.approx(HDOT_NORM2, abs=1e-7)


@pytest.mark.parametrize("v", [0.1, 0.3])
def test_boosted_kink_energy_and_momentum(v):
    g = Grid.symmetric(40.0, 0.01)
    s = moving_kink_state(MovingKink(Orientation.rise01, v), 0.0, g)
    assert energy(s) * lorentz_gamma(v) == pytest.approx(HDOT_NORM2, abs=1e-6)
    assert boosted_kink_energy(v) == pytest.approx(HDOT_NORM2 / math.sqrt(1 - v * v))
    # int pi phi_x = -v ||H'||^2 / gamma for a right mover
    assert momentum(s) == pytest.approx(-v * HDOT_NORM2 / lorentz_gamma(v), abs=1e-7)


def test_truncated_state_warns():
    g = Grid.symmetric(3.0, 0.1)
    s = FieldPair(0.0, kink_eval(0, g.x), np.zeros(g.n), g)
    with pytest.warns(RuntimeWarning):
        energy(s)
    assert record(s).boundary_flag


def test_odd_state_half_energy():
    g = Grid.symmetric(40.0, 0.01)
    s = kink_pair_state(0.1, 10.0, g)
    e_plus, _, phi0, _ = half_line_quantities(s)
    assert e_plus == pytest.approx(energy(s) / 2, abs=1e-13)
    assert phi0 == 0.0


def test_p_plus_brute_quadrature():
    v, y = 0.1, 10.0
    g = Grid.symmetric(40.0, 0.005)
    s = kink_pair_state(v, y, g)
    _, p_plus, _, _ = half_line_quantities(s)

    def dens(x):
        gm = lorentz_gamma(v)
        zr, zl = (x - y) / gm, (-x - y) / gm
        phx = (kink_eval(1, zr) + kink_eval(1, zl)) / gm
        pi = -(v / gm) * (kink_eval(1, zr) - kink_eval(1, zl))
        return float(pi * phx)

    ref = -0.5 * sint.quad(dens, 0.0, 40.0, points=[y], epsabs=1e-14, limit=200)[0]
    assert p_plus == pytest.approx(ref, abs=1e-10)


def test_static_pair_has_no_half_momentum():
    g = Grid.symmetric(30.0, 0.01)
    s = kink_pair_state(0.1, 8.0, g)
    s.pi[:] = 0.0
    assert half_line_quantities(s)[1] == 0.0


def test_half_line_grid_matches_full_line():
    half = Grid.from_bounds(0.0, 40.0, 0.01)
    full = Grid.symmetric(40.0, 0.01)
    a = half_line_quantities(kink_pair_state(0.1, 10.0, half))
    b = half_line_quantities(kink_pair_state(0.1, 10.0, full))
    assert a[0] == pytest.approx(b[0], abs=1e-12)
    assert a[1] == pytest.approx(b[1], abs=1e-12)
    assert a[3] == pytest.approx(b[3], abs=1e-10)


def test_mirrored_half_line():
    # the left half of an odd state carries the same E+ and opposite P+
    g = Grid.symmetric(40.0, 0.01)
    s = kink_pair_state(0.1, 10.0, g)
    mirrored = FieldPair(0.0, -s.phi[::-1], -s.pi[::-1], g)
    a, b = half_line_quantities(s), half_line_quantities(mirrored)
    assert a[0] == pytest.approx(b[0], abs=1e-14)
    assert a[1] == pytest.approx(b[1], abs=1e-14)
    # -1/2 int_{x<0} pi phi_x, read through the reflected state (phi_x changes sign)
    flipped = FieldPair(0.0, s.phi[::-1], s.pi[::-1], g)
    p_left = -half_line_quantities(flipped)[1]
    assert p_left == pytest.approx(-a[1], abs=1e-14)


def test_grid_without_zero_rejected():
    g = Grid(0.005, 0.01, 100)
    s = FieldPair(0.0, np.zeros(g.n), np.zeros(g.n), g)
    with pytest.raises(ValueError):
        half_line_quantities(s)


def test_lyapunov_combination():
    g = Grid.symmetric(40.0, 0.005)
    s = kink_pair_state(0.1, 12.0, g)
    assert lyapunov_M(s, 0.0) == half_line_quantities(s)[0]
    y0 = 12.0
    tail = (1 + y0) * math.exp(-2 * math.sqrt(2) * y0)
    assert lyapunov_M(s, 0.1) == pytest.approx(pair_lyapunov_leading(0.1), abs=10 * tail + 1e-9)


def test_flux_check_static_pair():
    g = Grid.from_bounds(0.0, 30.0, 0.05)
    s = kink_pair_state(0.1, 8.0, g)
    s.pi[:] = 0.0
    recs = []
    for t in (0.0, 0.5, 1.0, 1.5):
        r = record(s, 0.1)
        r.t = t
        r.dphi0 = 0.0
        recs.append(r)
    dev, inc = flux_check(recs)
    assert dev == 0.0 and inc == 0.0


def test_flux_check_needs_uniform_records():
    r = [DiagnosticsRecord(t, 0, 0, 0, 0, 0, 0, 0) for t in (0.0, 0.5, 1.2)]
    with pytest.raises(ValueError):
        flux_check(r)
    with pytest.raises(ValueError):
        flux_check(r[:2])


def test_record_on_half_line():
    half = Grid.from_bounds(0.0, 40.0, 0.01)
    full = Grid.symmetric(40.0, 0.01)
    a = record(kink_pair_state(0.1, 10.0, half), 0.1)
    b = record(kink_pair_state(0.1, 10.0, full), 0.1)
    assert a.E == pytest.approx(b.E, abs=1e-11)
    assert a.P == 0.0 and abs(b.P) < 1e-12
    assert a.M_lyap == pytest.approx(a.E_plus - 0.1 * a.P_plus)


def test_records_csv(tmp_path):
    g = Grid.symmetric(20.0, 0.1)
    recs = [record(kink_pair_state(0.1, 5.0, g, t)) for t in (0.0, 1.0)]
    write_records_csv(tmp_path / "d.csv", recs)
    with open(tmp_path / "d.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:7] == ["t", "E", "P", "E_plus", "P_plus", "phi0", "M_lyap"]
    assert len(rows) == 3
    assert diagnostics.VACUUM_TOL == 1e-6
