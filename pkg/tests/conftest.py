import numpy as np
import pytest

from kinklab import experiments
from kinklab.field_core import Grid

# name -> (passed, detail); filled by test_acceptance, printed at the end of the run
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def fine_grid():
    return Grid.symmetric(40.0, 0.005)


@pytest.fixture(scope="session")
def collision_v01():
    """The v = 0.1 collision at the reference resolution, with the convergence gate."""
    return experiments.collision_with_gate(0.1, 0.02, 0.005)


@pytest.fixture(scope="session")
def sweep_reports(collision_v01):
    reps = {0.1: collision_v01}
    for v in (0.05, 0.15, 0.2):
        reps[v] = experiments.collision_with_gate(v, 0.02, 0.005)
    return [reps[v] for v in sorted(reps)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0])):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
