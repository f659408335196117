import math

import numpy as np
import pytest

from conftest import random_density
from hdqkd import clicks, states
from hdqkd.errors import IncompleteSettingError

PHASES = [clicks.X_SETTING, clicks.Y_SETTING]


def coherences(rho, i, j):
    """Direct read-off of Re<i,j|rho^T|i-1,j-1> and Re<i,j-1|rho^T|i-1,j>."""
    d = rho.dim
    m = np.asarray(rho.to_matrix())
    # <x|rho^T|y> = <y|rho|x>
    main = m[(i - 1) * d + (j - 1), i * d + j].real
    cross = m[(i - 1) * d + j, i * d + (j - 1)].real
    return main, cross


def test_toa_examples():
    assert np.allclose(clicks.toa_table(states.max_entangled(2)), [[0.5, 0.0], [0.0, 0.5]])
    tt = clicks.toa_table(states.isotropic(4, 0.8))
    assert math.isclose(tt[0, 0], 0.2125) and math.isclose(tt[0, 1], 0.0125)
    assert np.allclose(clicks.toa_table(states.isotropic(3, 0.0)), 1 / 9)


def test_maximally_mixed_clicks():
    rho = states.isotropic(3, 0.0)
    for a, b in clicks.OUTCOMES:
        for pa, pb in PHASES:
            assert math.isclose(clicks.tsup_click(rho, a, b, 1, 2, pa, pb), 1 / 9, abs_tol=1e-15)


def test_max_entangled_d2_value():
    # four diagonal terms 0.5 + 0 + 0 + 0.5 plus 2 Re<11|rho|00> = 1, divided by 4
    rho = states.max_entangled(2)
    assert math.isclose(clicks.tsup_click(rho, 1, 1, 1, 1, 0.0, 0.0), 0.5, abs_tol=1e-14)
    assert math.isclose(clicks.tsup_click_oracle(rho, 1, 1, 1, 1, 0.0, 0.0), 0.5, abs_tol=1e-14)


def test_outcome_sum_equals_four_cell_mass(rng):
    rho = random_density(3, rng)
    tt = clicks.toa_table(rho)
    for pa, pb in PHASES + [(0.3, 1.9)]:
        total = sum(clicks.tsup_click(rho, a, b, 2, 1, pa, pb) for a, b in clicks.OUTCOMES)
        assert math.isclose(total, tt[2, 1] + tt[1, 1] + tt[2, 0] + tt[1, 0], abs_tol=1e-12)


def test_oracle_probabilities_bounded(rng):
    rho = random_density(4, rng)
    for i in range(1, 4):
        for pa, pb in PHASES:
            vals = [clicks.tsup_click_oracle(rho, a, b, i, i, pa, pb) / 4 for a, b in clicks.OUTCOMES]
            assert min(vals) >= -1e-12 and sum(vals) <= 1 + 1e-12


@pytest.mark.parametrize("v", [0.0, 0.4, 1.0])
def test_d_combination_isotropic(v):
    rho = states.isotropic(4, v)
    for i in (1, 2, 3):
        dx = clicks.d_combination({o: clicks.tsup_click(rho, *o, i, i, *clicks.X_SETTING) for o in clicks.OUTCOMES})
        dy = clicks.d_combination({o: clicks.tsup_click(rho, *o, i, i, *clicks.Y_SETTING) for o in clicks.OUTCOMES})
        assert math.isclose(dx, 2 * v / 4, abs_tol=1e-14)
        assert math.isclose(dy, -2 * v / 4, abs_tol=1e-14)
        main, cross = clicks.extract_re_offdiag(dx, dy)
        assert math.isclose(main, v / 4, abs_tol=1e-14) and abs(cross) < 1e-14


def test_incomplete_setting():
    with pytest.raises(IncompleteSettingError):
        clicks.d_combination({(1, 1): 0.1, (2, 2): 0.1})


def test_bin_zero_rejected():
    with pytest.raises(IndexError):
        clicks.tsup_click(states.isotropic(3, 0.5), 1, 1, 0, 1, 0.0, 0.0)
    with pytest.raises(IndexError):
        clicks.tsup_click_oracle(states.isotropic(3, 0.5), 1, 1, 1, 3, 0.0, 0.0)


def test_round_trip_100_random_states(rng):
    for _ in range(100):
        rho = random_density(4, rng)
        ex = clicks.extract_elements(clicks.simulate_clicks(rho, "all"))
        for (i, j), (main, cross) in ex.re_offdiag_nn.items():
            want = coherences(rho, i, j)
            assert abs(main - want[0]) < 1e-12 and abs(cross - want[1]) < 1e-12


def test_vectorised_simulation_matches_scalar(rng):
    rho = random_density(3, rng)
    tables = clicks.simulate_clicks(rho, "all")
    for (a, b, i, j, pa, pb), value in tables.ss.items():
        assert abs(value - clicks.tsup_click(rho, a, b, i, j, pa, pb)) < 1e-14


def test_transpose_flag_only_matters_for_complex(rng):
    real = random_density(3, rng, real=True)
    t1 = clicks.simulate_clicks(real, "all", transpose=True)
    t2 = clicks.simulate_clicks(real, "all", transpose=False)
    assert all(abs(t1.ss[k] - t2.ss[k]) < 1e-14 for k in t1.ss)


def test_xonly_examples():
    rho = states.isotropic(4, 1.0)
    dx = clicks.d_combination({o: clicks.tsup_click(rho, *o, 1, 1, 0.0, 0.0) for o in clicks.OUTCOMES})
    tt = clicks.toa_table(rho)
    assert math.isclose(clicks.xonly_lower_bound(dx, tt, 1, 1), 0.25, abs_tol=1e-14)
    tt0 = clicks.toa_table(states.isotropic(4, 0.0))
    assert math.isclose(clicks.xonly_lower_bound(0.0, tt0, 1, 1), -1 / 16, abs_tol=1e-15)


def test_xonly_bound_valid_on_random_states(rng):
    for n in range(500):
        rho = random_density(4, rng, real=(n % 2 == 0), rank=int(rng.integers(1, 17)))
        tables = clicks.simulate_clicks(rho, "all", settings=[clicks.X_SETTING])
        ex = clicks.extract_elements(tables)
        for (i, j), lb in ex.lower_bounds.items():
            assert lb <= coherences(rho, i, j)[0] + 1e-12


def test_xonly_counterexample_for_quarter_scaling():
    # alpha(|11> - |00>) + beta(|10> - |01>): D(0,0)/4 - sqrt(TT TT) overshoots the true value
    a, b = math.sqrt(0.4), math.sqrt(0.1)
    psi = np.array([-a, -b, b, a])
    rho = states.DensityMatrix(2, np.outer(psi, psi))
    tables = clicks.simulate_clicks(rho, "all", settings=[clicks.X_SETTING])
    dx = clicks.d_combination(tables.setting(1, 1, 0.0, 0.0))
    true = coherences(rho, 1, 1)[0]
    naive = dx / 4 - math.sqrt(tables.tt[0, 1] * tables.tt[1, 0])
    assert naive > true + 0.01
    assert clicks.xonly_lower_bound(dx, tables.tt, 1, 1) <= true + 1e-12


def test_missing_y_setting_gives_warning_and_bound():
    tables = clicks.simulate_clicks(states.isotropic(4, 0.8), settings=[clicks.X_SETTING])
    ex = clicks.extract_elements(tables)
    assert not ex.re_offdiag_nn and set(ex.lower_bounds) == {(1, 1), (2, 2), (3, 3)}
    assert ex.warnings


def test_condition_tables_matches_projected_state():
    rho = states.isotropic(8, 0.6)
    tables = clicks.simulate_clicks(rho, "all")
    weight, local = clicks.condition_tables(tables, range(4, 8))
    w_ref, cond = states.project_subspace(rho, range(4, 8))
    assert math.isclose(weight, w_ref, abs_tol=1e-14)
    ref = clicks.simulate_clicks(cond, "all")
    assert np.allclose(local.tt, ref.tt, atol=1e-14)
    assert set(local.ss) == set(ref.ss)
    assert all(abs(local.ss[k] - ref.ss[k]) < 1e-14 for k in ref.ss)
