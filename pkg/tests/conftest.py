import numpy as np
import pytest

from hdqkd import clicks, states, witnesses

ACCEPTANCE = {}


def constraints_for(d, v, preset=None):
    """Band-interval and off-diagonal equality constraints for isotropic(d, v)."""
    preset = preset or {"name": "khexp"}
    w1, w2 = witnesses.witness_pair(preset, d)
    state = states.IsotropicState(d, v)
    tables = clicks.simulate_clicks(state)
    ex = clicks.extract_elements(tables)
    return [witnesses.expectation_interval_w1(w1, tables.tt, ex), witnesses.expectation_w2(tables.tt, w2.p)]


def random_density(d, rng, real=False, rank=None):
    n = d * d
    rank = rank or n
    g = rng.normal(size=(n, rank))
    if not real:
        g = g + 1j * rng.normal(size=(n, rank))
    m = g @ g.conj().T
    return states.DensityMatrix(d, m / np.trace(m).real)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<4} {'PASS' if ok else 'FAIL'}  {detail}")
