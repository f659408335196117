import math

import numpy as np
import pytest

from conftest import constraints_for
from hdqkd import dual, spectra, witnesses
from hdqkd.errors import ConfigError, InfeasiblePointError


def primal_sdp(constraints, d):
    """Guessing-probability primal solved by a generic conic solver."""
    cp = pytest.importorskip("cvxpy")
    n = d * d
    sig = [cp.Variable((n, n), symmetric=True) for _ in range(d)]
    total = sum(sig)
    cons = [s >> 0 for s in sig] + [cp.trace(total) == 1]
    for c in constraints:
        w = np.real(c.operator.dense())
        if c.is_equality:
            cons.append(cp.trace(w @ total) == c.kind.value)
        else:
            cons += [cp.trace(w @ total) >= c.kind.lower, cp.trace(w @ total) <= c.kind.upper]
    proj = [np.kron(np.diag(np.eye(d)[l]), np.eye(d)) for l in range(d)]
    prob = cp.Problem(cp.Maximize(sum(cp.trace(proj[l] @ sig[l]) for l in range(d))), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value


def test_no_constraints_trivial():
    b = dual.minimize([], 3)
    assert b.p_guess_ub == 1.0 and len(b.lambda_per_ell) == 3
    m = dual.assemble_M(1, [], dual.DualPoint(), 3)
    assert np.array_equal(m, np.kron(np.diag([0, 1, 0]), np.eye(3)))


def test_single_equality_formula():
    w2 = witnesses.OffDiagonalProjectorWitness(2, 1.0)
    c = witnesses.WitnessConstraint(w2, witnesses.Equality(0.0))
    m = dual.assemble_M(0, [c], dual.DualPoint((1.0,)), 2)
    assert np.array_equal(m, np.kron(np.diag([1, 0]), np.eye(2)) - w2.dense())
    # y0 = max(1, 0, -1) = 1, objective 1 + 1 * 0
    assert dual.objective(dual.DualPoint((1.0,)), [c], 2) == 1.0


@pytest.mark.parametrize("d", [2, 3, 4, 8, 16])
def test_blocked_and_dense_lambdas_agree(d):
    cons = constraints_for(d, 0.8)
    rng = np.random.default_rng(d)
    for _ in range(3):
        s, t = rng.normal(size=2)
        point = dual.DualPoint((t,), (max(-s, 0.0),), (max(s, 0.0),))
        fast = dual.lambdas(point, cons, d, structured=True)
        ref = [np.linalg.eigvalsh(dual.assemble_M(ell, cons, point, d))[-1] for ell in range(d)]
        assert np.max(np.abs(fast - ref)) < 1e-10
        if d <= 4:
            assert np.max(np.abs(dual.lambdas(point, cons, d, structured=False) - ref)) < 1e-10


def test_zero_multipliers_give_one():
    cons = constraints_for(3, 0.9)
    assert dual.objective(dual.DualPoint((0.0,), (0.0,), (0.0,)), cons, 3) == 1.0


def test_negative_multiplier_rejected():
    cons = constraints_for(3, 0.9)
    with pytest.raises(InfeasiblePointError):
        dual.objective(dual.DualPoint((0.0,), (-0.1,), (0.0,)), cons, 3)


def test_dimension_mismatch():
    with pytest.raises(ConfigError):
        dual.minimize(constraints_for(3, 0.9) + constraints_for(4, 0.9)[:1])


@pytest.mark.parametrize("d,v", [(2, 0.9), (3, 0.9), (4, 1.0), (4, 0.8)])
def test_matches_primal_sdp(d, v):
    cons = constraints_for(d, v)
    b = dual.minimize(cons, d)
    ref = primal_sdp(cons, d)
    assert b.p_guess_ub >= ref - 1e-6
    assert abs(b.p_guess_ub - ref) < 1e-5


def test_fast_and_generic_paths_agree():
    cons = constraints_for(4, 0.85)
    fast = dual.minimize(cons, 4)
    generic = dual.minimize(cons, 4, dual.SolverOptions(fast_path=False, max_evals=600))
    assert generic.p_guess_ub >= fast.p_guess_ub - 1e-8
    assert abs(generic.p_guess_ub - fast.p_guess_ub) < 1e-6


def test_generic_witness_path(rng):
    cons = constraints_for(3, 0.9)
    dense = [witnesses.WitnessConstraint(witnesses.GenericWitness(3, c.operator.dense()), c.kind) for c in cons]
    b = dual.minimize(dense, 3)
    assert abs(b.p_guess_ub - dual.minimize(cons, 3).p_guess_ub) < 1e-5
    assert dual.verify_certificate(b, dense, 3).passed


def test_adding_constraints_never_raises_bound():
    cons = constraints_for(4, 0.9)
    full = dual.minimize(cons, 4).p_guess_ub
    assert full <= dual.minimize(cons[:1], 4).p_guess_ub + 1e-9
    assert full <= dual.minimize(cons[1:], 4).p_guess_ub + 1e-9
    assert full <= dual.minimize([], 4).p_guess_ub


def test_objective_never_below_minimum():
    cons = constraints_for(4, 0.9)
    best = dual.minimize(cons, 4).p_guess_ub
    rng = np.random.default_rng(7)
    for _ in range(50):
        y, zl, zu = rng.normal(size=1), rng.uniform(0, 1, 1), rng.uniform(0, 1, 1)
        assert dual.objective(dual.DualPoint(y, zl, zu), cons, 4) >= best - 1e-9


def test_convex_along_segments():
    cons = constraints_for(4, 0.8)
    rng = np.random.default_rng(3)

    def pt(x):
        return dual.DualPoint(x[:1], x[1:2], x[2:])

    for _ in range(100):
        a = np.concatenate([rng.normal(size=1), rng.uniform(0, 2, 2)])
        b = np.concatenate([rng.normal(size=1), rng.uniform(0, 2, 2)])
        fa, fb = dual.objective(pt(a), cons, 4), dual.objective(pt(b), cons, 4)
        assert dual.objective(pt(0.5 * (a + b)), cons, 4) <= 0.5 * (fa + fb) + 1e-9


def test_deterministic_given_seed():
    cons = constraints_for(8, 0.85)
    opts = dual.SolverOptions(seed=11)
    a, b = dual.minimize(cons, 8, opts), dual.minimize(cons, 8, opts)
    assert a == b


def test_certificate_negative_controls():
    cons = constraints_for(3, 0.9)
    good = dual.minimize(cons, 3)
    assert dual.verify_certificate(good, cons, 3).passed
    bad_z = dual.GuessBound(good.p_guess_ub, dual.DualPoint(good.point.y, (-0.1,), good.point.zU), good.lambda_per_ell)
    assert not dual.verify_certificate(bad_z, cons, 3).passed
    y0 = good.y0 - 1e-3
    low = dual.GuessBound(
        y0 + dual._linear_term(good.point, cons), good.point, good.lambda_per_ell, (), y0
    )
    rep = dual.verify_certificate(low, cons, 3)
    assert not rep.passed and any("M_" in v for v in rep.violations)


def test_large_d_sector_certificate_negative_control():
    cons = constraints_for(16, 0.9)
    good = dual.minimize(cons, 16)
    y0 = good.y0 - 1e-3
    low = dual.GuessBound(y0 + dual._linear_term(good.point, cons), good.point, good.lambda_per_ell, (), y0)
    assert not dual.verify_certificate(low, cons, 16).passed


def test_lambda_per_ell_keeps_all_values():
    cons = constraints_for(5, 0.9)
    b = dual.minimize(cons, 5)
    assert len(b.lambda_per_ell) == 5 and b.y0 == max(b.lambda_per_ell)
    assert math.isclose(b.p_guess_ub, b.y0 + dual._linear_term(b.point, cons), abs_tol=1e-15)


def test_blocked_lambda_helper_consistent():
    cons = constraints_for(6, 0.7)
    b = dual.minimize(cons, 6)
    s = b.point.zU[0] - b.point.zL[0]
    for ell in range(6):
        val = spectra.lambda_max_blocked(ell, cons[0].operator.q, 1.0, s, b.point.y[0])
        assert abs(val - b.lambda_per_ell[ell]) < 1e-12
