import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdqkd import states
from hdqkd.errors import DomainError, EmptySubspaceError, InvalidDimensionError


def brute_isotropic(d, v):
    phi = np.zeros(d * d)
    for k in range(d):
        phi[k * d + k] = 1.0
    phi /= np.sqrt(d)
    return v * np.outer(phi, phi) + (1 - v) * np.eye(d * d) / d**2


@pytest.mark.parametrize("d", [2, 3, 5])
@pytest.mark.parametrize("v", [0.0, 0.37, 1.0])
def test_isotropic_matches_explicit_construction(d, v):
    st_ = states.IsotropicState(d, v)
    assert np.allclose(st_.to_matrix(), brute_isotropic(d, v), atol=1e-15)
    n = d * d
    rows, cols = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    assert np.allclose(st_.entries(rows, cols), brute_isotropic(d, v), atol=1e-15)
    assert np.allclose(st_.diagonal(), np.diag(brute_isotropic(d, v)))


def test_max_entangled_is_pure():
    rho = states.max_entangled(3).to_matrix()
    assert np.allclose(rho @ rho, rho, atol=1e-14)
    assert np.isclose(np.trace(rho).real, 1.0)


@pytest.mark.parametrize("bad", [1, 0, 2.5])
def test_invalid_dimension(bad):
    with pytest.raises(InvalidDimensionError):
        states.IsotropicState(bad, 0.5)


@pytest.mark.parametrize("bad", [-0.1, 1.2])
def test_visibility_domain(bad):
    with pytest.raises(DomainError):
        states.isotropic(3, bad)


def test_validate_reports_defects():
    ok = states.validate(states.isotropic(3, 0.6))
    assert ok.passed and abs(ok.trace_defect) < 1e-12 and ok.min_eigenvalue >= -1e-12
    bad = np.eye(4) * 0.3
    bad[0, 0] = -0.1
    rep = states.validate(bad)
    assert not rep.passed and rep.min_eigenvalue < 0


def brute_project(m, d, block):
    idx = [i * d + j for i in block for j in block]
    sub = m[np.ix_(idx, idx)]
    w = np.trace(sub).real
    return w, sub / w


@given(st.sampled_from([(4, 2), (6, 3), (8, 4), (6, 2)]), st.floats(0.0, 1.0))
@settings(max_examples=30, deadline=None)
def test_structured_projection_matches_brute_force(dims, v):
    d, size = dims
    part = states.SubspacePartition(d, size)
    for block in part.blocks:
        w, cond = states.project_subspace(states.IsotropicState(d, v), block)
        w_ref, cond_ref = brute_project(brute_isotropic(d, v), d, block)
        assert abs(w - w_ref) < 1e-12
        assert np.allclose(cond.to_matrix(), cond_ref, atol=1e-12)


def test_projection_of_dense_state(rng):
    from conftest import random_density

    rho = random_density(4, rng)
    w, cond = states.project_subspace(rho, [1, 3])
    w_ref, ref = brute_project(np.asarray(rho.to_matrix()), 4, [1, 3])
    assert np.isclose(w, w_ref) and np.allclose(cond.to_matrix(), ref)


def test_projection_block_of_one():
    w, cond = states.project_subspace(states.IsotropicState(4, 0.5), [2])
    assert np.isclose(w, 0.5 / 4 + 0.5 / 16)
    assert cond.dim == 1 and np.allclose(cond.to_matrix(), [[1.0]])


def test_empty_subspace():
    rho = states.DensityMatrix(2, np.diag([1.0, 0.0, 0.0, 0.0]))
    with pytest.raises(EmptySubspaceError):
        states.project_subspace(rho, [1])


def test_partition_validation():
    with pytest.raises(DomainError):
        states.SubspacePartition(8, 3)
    with pytest.raises(DomainError):
        states.SubspacePartition.from_blocks(4, [(0, 1), (1, 2)])
    part = states.SubspacePartition.from_blocks(4, [(0, 2), (1, 3)])
    assert part.count == 2


def test_noise_model_spec_builds_state():
    st_ = states.NoiseModelSpec(0.8, 5).state()
    assert isinstance(st_, states.IsotropicState) and st_.dim == 5
